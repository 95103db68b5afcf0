#pragma once

#include "regsig/random.hpp"
#include "regsig/simulator.hpp"

#include <vector>

namespace regsig {

/// One environment step. `state`/`next` are the scaled observations the precedence function reads;
/// `features`/`next_features` are the encoded network inputs of the same states.
struct Transition {
    Observation state;
    std::vector<double> features;
    std::size_t action = 0;
    double reward = 0.0;
    Observation next;
    std::vector<double> next_features;
    bool terminal = false;
};

/// Fixed-capacity ring buffer with uniform sampling (with replacement).
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& operator[](std::size_t i) const { return items_[i]; }

    std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;
    std::vector<const Transition*> sample(std::size_t count, Rng& rng) const;

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::vector<Transition> items_;
};

} // namespace regsig
