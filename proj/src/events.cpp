#include "opdyn/events.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iostream>
#include <limits>
#include <string>

#include <json.hpp>

#include "opdyn/detail/csv.hpp"
#include "opdyn/errors.hpp"

namespace opdyn {

namespace {

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    std::filesystem::path p = path;
    p.replace_extension(".meta.json");
    return p;
}

}  // namespace

EventStream::EventStream(std::vector<Event> events, double horizon)
    : events_(std::move(events)), horizon_(horizon) {
    for (const Event& e : events_) {
        if (!std::isfinite(e.time) || e.time < 0.0)
            throw InputError("event time must be finite and non-negative");
        if (!std::isfinite(e.sentiment))
            throw InputError("event sentiment must be finite");
    }
    std::stable_sort(events_.begin(), events_.end(),
                     [](const Event& a, const Event& b) { return a.time < b.time; });
    if (!events_.empty() && events_.back().time >= horizon_)
        throw InputError("event time at or beyond the stream horizon");
}

SplitResult split(const EventStream& stream, const SplitSpec& spec) {
    if (stream.empty()) throw InputError("cannot split an empty stream");
    if (!(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0))
        throw InputError("train_fraction must lie in (0,1]");

    const std::size_t n = stream.size();
    const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(n)));

    std::vector<Event> train(stream.events().begin(), stream.events().begin() + n_train);
    std::vector<Event> test(stream.events().begin() + n_train, stream.events().end());

    double train_horizon = stream.horizon();
    if (!test.empty()) {
        train_horizon = test.front().time;
        // A time tie across the boundary would put a train event at the
        // horizon; bump minimally in that case.
        if (!train.empty() && train.back().time >= train_horizon)
            train_horizon = std::nextafter(train.back().time, std::numeric_limits<double>::infinity());
    }
    return SplitResult{EventStream(std::move(train), train_horizon),
                       EventStream(std::move(test), stream.horizon())};
}

StreamStats summarize(const EventStream& stream, const SocialGraph& graph) {
    StreamStats s;
    s.n_users = graph.n_users();
    s.n_edges = graph.n_edges();
    s.n_events = stream.size();
    if (stream.empty()) return s;

    double sum = 0.0;
    for (const Event& e : stream.events()) sum += e.sentiment;
    s.mean_sentiment = sum / static_cast<double>(stream.size());

    double sq = 0.0;
    for (const Event& e : stream.events()) {
        const double d = e.sentiment - s.mean_sentiment;
        sq += d * d;
    }
    s.std_sentiment = std::sqrt(sq / static_cast<double>(stream.size()));
    return s;
}

EventStream load_events(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    const std::string name = path.string();

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw FormatError(name, 1, "empty file, expected header");
    ++line_no;
    const std::string header = detail::strip(line);
    bool has_label_column = false;
    if (header == "user_id,sentiment,timestamp,label")
        has_label_column = true;
    else if (header != "user_id,sentiment,timestamp")
        throw FormatError(name, line_no, "unexpected header '" + header + "'");

    std::vector<Event> events;
    bool warned_range = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::strip(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        const std::size_t expected = has_label_column ? 4 : 3;
        if (fields.size() != expected)
            throw FormatError(name, line_no,
                              "expected " + std::to_string(expected) + " fields, got " +
                                  std::to_string(fields.size()));
        Event e;
        e.user = static_cast<UserId>(detail::parse_uint(fields[0], name, line_no));
        e.sentiment = detail::parse_double(fields[1], name, line_no);
        e.time = detail::parse_double(fields[2], name, line_no);
        if (has_label_column) {
            std::string token = detail::strip(fields[3]);
            std::transform(token.begin(), token.end(), token.begin(),
                           [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
            if (token == "endo")
                e.label = EventLabel::Endo;
            else if (token == "exo")
                e.label = EventLabel::Exo;
            else if (!token.empty())
                throw FormatError(name, line_no, "unknown label token '" + fields[3] + "'");
        }
        if (!warned_range && e.label == std::nullopt && std::abs(e.sentiment) > 1.0) {
            std::cerr << "warning: " << name << ":" << line_no
                      << ": |sentiment| > 1 on an unlabeled stream\n";
            warned_range = true;
        }
        events.push_back(e);
    }

    double horizon = 0.0;
    const auto meta = sidecar_path(path);
    if (std::filesystem::exists(meta)) {
        nlohmann::json j;
        detail::open_input(meta) >> j;
        horizon = j.at("horizon").get<double>();
    } else if (!events.empty()) {
        double last = 0.0;
        for (const Event& e : events) last = std::max(last, e.time);
        horizon = std::nextafter(last, std::numeric_limits<double>::infinity());
    }
    return EventStream(std::move(events), horizon);
}

void save_events(const EventStream& stream, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    out << "user_id,sentiment,timestamp,label\n";
    for (const Event& e : stream.events()) {
        out << e.user << "," << detail::format_double(e.sentiment) << ","
            << detail::format_double(e.time) << ",";
        if (e.label == EventLabel::Endo)
            out << "endo";
        else if (e.label == EventLabel::Exo)
            out << "exo";
        out << "\n";
    }

    nlohmann::json j;
    j["horizon"] = stream.horizon();
    j["n_events"] = stream.size();
    detail::open_output(sidecar_path(path)) << j.dump(2) << "\n";
}

}  // namespace opdyn
