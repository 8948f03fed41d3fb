#include "omdp/adversary.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace omdp {

HistoryView::HistoryView(const std::vector<int>& states, const std::vector<int>& actions, int num_states,
                         int num_actions)
    : states_(states), actions_(actions), num_states_(num_states), num_actions_(num_actions) {
    if (states.empty() || actions.size() + 1 != states.size())
        throw std::logic_error("history view needs t states and t - 1 actions");
}

int HistoryView::state(int i) const {
    if (i < 1 || i > round()) throw std::out_of_range("state index outside 1..t");
    return states_[i - 1];
}

int HistoryView::action(int i) const {
    if (i < 1 || i >= round()) throw std::out_of_range("action index outside 1..t-1");
    return actions_[i - 1];
}

std::string stream_kind_name(StreamKind kind) {
    switch (kind) {
        case StreamKind::Constant: return "constant";
        case StreamKind::Switching: return "switching";
        case StreamKind::Sinusoidal: return "sinusoidal";
        case StreamKind::UniformRandom: return "uniform-random";
        case StreamKind::LeastVisited: return "least-visited";
        case StreamKind::SignFlip: return "sign-flip";
    }
    return "unknown";
}

std::optional<StreamKind> parse_stream_kind(const std::string& name) {
    for (auto k : {StreamKind::Constant, StreamKind::Switching, StreamKind::Sinusoidal, StreamKind::UniformRandom,
                   StreamKind::LeastVisited, StreamKind::SignFlip})
        if (stream_kind_name(k) == name) return k;
    return std::nullopt;
}

void validate_stream_spec(const StreamSpec& spec, int num_pairs) {
    if (spec.period < 1) throw std::invalid_argument("switching period must be >= 1");
    if (!(spec.range > 0.0 && spec.range <= 1.0)) throw std::invalid_argument("range must be in (0, 1]");
    if (!(spec.amplitude >= 0.0 && spec.amplitude <= 1.0)) throw std::invalid_argument("amplitude must be in [0, 1]");
    if (!std::isfinite(spec.frequency)) throw std::invalid_argument("frequency must be finite");
    if (spec.table) {
        if (spec.table->size() != num_pairs) throw std::invalid_argument("constant table has the wrong length");
        check_reward_bounds(*spec.table, 0.0);
    }
}

RewardStream::RewardStream(const StreamSpec& spec, int num_states, int num_actions, std::uint64_t seed)
    : spec_(spec), num_states_(num_states), num_actions_(num_actions), rng_(seed) {
    const int n = num_states * num_actions;
    validate_stream_spec(spec, n);
    switch (spec.kind) {
        case StreamKind::Constant: base_ = spec.table ? *spec.table : draw_table(spec.range); break;
        case StreamKind::Switching:
            base_ = draw_table(spec.range);
            other_ = draw_table(spec.range);
            break;
        case StreamKind::Sinusoidal: {
            std::uniform_real_distribution<double> u(0.0, 2 * std::numbers::pi);
            phase_.resize(n);
            for (int i = 0; i < n; ++i) phase_[i] = u(rng_);
            break;
        }
        case StreamKind::UniformRandom: break;
        case StreamKind::LeastVisited: visits_.assign(n, 0); break;
        case StreamKind::SignFlip: base_ = draw_table(spec.range); break;
    }
}

RewardStream::RewardStream(AdaptiveRule rule, int num_states, int num_actions)
    : rule_(std::move(rule)), num_states_(num_states), num_actions_(num_actions) {
    if (!rule_) throw std::invalid_argument("adaptive rule is empty");
}

bool RewardStream::oblivious() const {
    if (rule_) return false;
    return spec_.kind != StreamKind::LeastVisited && spec_.kind != StreamKind::SignFlip;
}

RewardTable RewardStream::draw_table(double range) {
    std::uniform_real_distribution<double> u(-range, range);
    RewardTable r(num_states_ * num_actions_);
    for (int i = 0; i < r.size(); ++i) r[i] = u(rng_);
    return r;
}

RewardTable RewardStream::next(const HistoryView& view) {
    if (view.round() != round_ + 1) throw std::logic_error("reward stream called out of sequence");
    if (view.num_states() != num_states_ || view.num_actions() != num_actions_)
        throw std::invalid_argument("history view shape does not match the stream");
    const int t = ++round_;
    RewardTable r;
    if (rule_) {
        r = rule_(view);
        if (r.size() != num_states_ * num_actions_) throw std::invalid_argument("adaptive rule returned wrong length");
    } else {
        switch (spec_.kind) {
            case StreamKind::Constant: r = base_; break;
            case StreamKind::Switching: r = ((t - 1) / spec_.period) % 2 == 0 ? base_ : other_; break;
            case StreamKind::Sinusoidal:
                r = spec_.amplitude * (2 * std::numbers::pi * spec_.frequency * t + phase_.array()).sin();
                break;
            case StreamKind::UniformRandom: r = draw_table(spec_.range); break;
            case StreamKind::LeastVisited: {
                for (; counted_ < t - 1; ++counted_) {
                    int i = counted_ + 1;
                    ++visits_[view.state(i) * num_actions_ + view.action(i)];
                }
                int best = 0;
                for (int i = 1; i < static_cast<int>(visits_.size()); ++i)
                    if (visits_[i] < visits_[best]) best = i;
                r = RewardTable::Zero(num_states_ * num_actions_);
                r[best] = 1.0;
                break;
            }
            case StreamKind::SignFlip: {
                if (t > 1) {
                    int s = view.current_state();
                    int best = 0;
                    for (int a = 1; a < num_actions_; ++a)
                        if (base_[s * num_actions_ + a] > base_[s * num_actions_ + best]) best = a;
                    base_[s * num_actions_ + best] = -base_[s * num_actions_ + best];
                }
                r = base_;
                break;
            }
        }
    }
    check_reward_bounds(r, 0.0);
    return r;
}

}  // namespace omdp
