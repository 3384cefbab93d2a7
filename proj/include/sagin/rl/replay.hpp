#pragma once

#include <vector>

#include "sagin/error.hpp"
#include "sagin/random.hpp"

namespace sagin::rl {

/// Bounded FIFO with uniform sampling (with replacement).
template <typename T>
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw InvalidArgument("replay capacity must be > 0");
        items_.reserve(capacity);
    }

    void push(T item) {
        if (items_.size() < capacity_) {
            items_.push_back(std::move(item));
        } else {
            items_[head_] = std::move(item);
            head_ = (head_ + 1) % capacity_;
        }
    }

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return items_.empty(); }

    /// i-th oldest element.
    const T& at(std::size_t i) const { return items_.at((head_ + i) % items_.size()); }

    std::vector<const T*> sample(std::size_t batch, Rng& rng) const {
        if (items_.empty()) throw InvalidArgument("cannot sample from an empty replay buffer");
        std::vector<const T*> out;
        out.reserve(batch);
        for (std::size_t i = 0; i < batch; ++i) out.push_back(&items_[rng.index(items_.size())]);
        return out;
    }

private:
    std::size_t capacity_;
    std::size_t head_ = 0; // oldest element once full
    std::vector<T> items_;
};

} // namespace sagin::rl
