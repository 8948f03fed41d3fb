// Reward adversaries. Adaptive rules see s_1..s_t and a_1..a_{t-1} only.
#pragma once

#include "omdp/mdp.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace omdp {

/// Read-only history at round t. Construction fails unless exactly t states and
/// t - 1 actions are present, so a_t cannot be part of the view.
class HistoryView {
public:
    HistoryView(const std::vector<int>& states, const std::vector<int>& actions, int num_states, int num_actions);

    int round() const { return static_cast<int>(states_.size()); }
    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }
    int current_state() const { return states_.back(); }

    /// 1-based: state(i) for i <= t, action(i) for i < t.
    int state(int i) const;
    int action(int i) const;

private:
    const std::vector<int>& states_;
    const std::vector<int>& actions_;
    int num_states_;
    int num_actions_;
};

enum class StreamKind { Constant, Switching, Sinusoidal, UniformRandom, LeastVisited, SignFlip };

std::string stream_kind_name(StreamKind kind);
std::optional<StreamKind> parse_stream_kind(const std::string& name);

struct StreamSpec {
    StreamKind kind = StreamKind::Constant;
    int period = 50;            // switching
    double frequency = 0.01;    // sinusoidal, cycles per round
    double amplitude = 1.0;     // sinusoidal
    double range = 1.0;         // uniform-random and the random base tables
    std::optional<RewardTable> table;  // constant; drawn from U[-range, range] when absent

    bool operator==(const StreamSpec&) const = default;
};

/// Throws std::invalid_argument on out-of-range parameters.
void validate_stream_spec(const StreamSpec& spec, int num_pairs);

using AdaptiveRule = std::function<RewardTable(const HistoryView&)>;

class RewardStream {
public:
    RewardStream(const StreamSpec& spec, int num_states, int num_actions, std::uint64_t seed);

    /// A user-supplied adaptive rule.
    RewardStream(AdaptiveRule rule, int num_states, int num_actions);

    /// r_t for the round described by the view. Every table is checked against |r| <= 1.
    RewardTable next(const HistoryView& view);

    bool oblivious() const;
    const StreamSpec& spec() const { return spec_; }

private:
    RewardTable draw_table(double range);

    StreamSpec spec_;
    AdaptiveRule rule_;
    int num_states_;
    int num_actions_;
    Rng rng_;
    int round_ = 0;
    RewardTable base_;
    RewardTable other_;
    Vector phase_;
    std::vector<long long> visits_;
    int counted_ = 0;
};

}  // namespace omdp
