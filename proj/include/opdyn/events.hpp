#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "opdyn/graph.hpp"

namespace opdyn {

enum class EventLabel { Endo, Exo };

/// One timestamped sentiment post. The label is ground truth from synthetic
/// generation only; demarcation never reads it.
struct Event {
    UserId user = 0;
    double sentiment = 0.0;
    double time = 0.0;
    std::optional<EventLabel> label;
};

/// Time-ordered event history over [0, horizon). Construction stable-sorts by
/// time, so ties keep their insertion order. Immutable afterwards.
class EventStream {
public:
    EventStream() = default;
    EventStream(std::vector<Event> events, double horizon);

    const std::vector<Event>& events() const noexcept { return events_; }
    double horizon() const noexcept { return horizon_; }
    std::size_t size() const noexcept { return events_.size(); }
    bool empty() const noexcept { return events_.empty(); }
    const Event& operator[](std::size_t i) const { return events_[i]; }

private:
    std::vector<Event> events_;
    double horizon_ = 0.0;
};

struct SplitSpec {
    double train_fraction = 0.9;  // in (0, 1]
};

struct SplitResult {
    EventStream train;
    EventStream test;
};

/// Count-based split on the time-ordered stream: train takes the first
/// floor(f * n) events. The train horizon is the first test event's time (or
/// the stream horizon when the test side is empty).
SplitResult split(const EventStream& stream, const SplitSpec& spec);

struct StreamStats {
    std::size_t n_users = 0;
    std::size_t n_edges = 0;
    std::size_t n_events = 0;
    double mean_sentiment = 0.0;
    double std_sentiment = 0.0;
};

StreamStats summarize(const EventStream& stream, const SocialGraph& graph);

/// CSV `user_id,sentiment,timestamp[,label]` with header; rows need not be
/// pre-sorted. A sidecar `<stem>.meta.json` carries {horizon, n_events}.
EventStream load_events(const std::filesystem::path& path);
void save_events(const EventStream& stream, const std::filesystem::path& path);

}  // namespace opdyn
