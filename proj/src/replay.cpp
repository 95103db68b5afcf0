#include "regsig/replay.hpp"

#include "regsig/error.hpp"

namespace regsig {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw Error("replay capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
    if (items_.size() < capacity_) {
        items_.push_back(std::move(t));
    } else {
        items_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count, Rng& rng) const {
    if (items_.empty()) throw Error("sampling an empty replay buffer");
    std::vector<std::size_t> idx(count);
    for (auto& i : idx) i = uniform_index(rng, items_.size());
    return idx;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t count, Rng& rng) const {
    std::vector<const Transition*> out;
    out.reserve(count);
    for (std::size_t i : sample_indices(count, rng)) out.push_back(&items_[i]);
    return out;
}

} // namespace regsig
