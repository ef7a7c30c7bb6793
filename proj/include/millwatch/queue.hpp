#pragma once

#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>

namespace millwatch {

enum class QueuePolicy { Block, DropOldest };

struct QueueCounters {
    uint64_t enqueued = 0;
    uint64_t dequeued = 0;
    uint64_t dropped = 0;
};

struct EnqueueResult {
    bool accepted = true;
    std::optional<uint64_t> dropped_seq;  // DropOldest eviction, if any
};

/// Bounded FIFO for one-producer/one-consumer stage links. Block makes the
/// producer wait at capacity; DropOldest evicts the oldest item and counts it.
/// Invariant (checked by conservation_holds): enqueued = dequeued + dropped +
/// occupancy.
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(size_t capacity = 128, QueuePolicy policy = QueuePolicy::Block)
        : capacity_(capacity), policy_(policy) {}

    EnqueueResult enqueue(T item, uint64_t seq = 0) {
        std::unique_lock lock(mutex_);
        EnqueueResult result;
        if (policy_ == QueuePolicy::Block) {
            not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
            if (closed_) {
                result.accepted = false;
                return result;
            }
        } else if (items_.size() >= capacity_) {
            result.dropped_seq = seqs_.front();
            items_.pop_front();
            seqs_.pop_front();
            ++counters_.dropped;
        }
        items_.push_back(std::move(item));
        seqs_.push_back(seq);
        ++counters_.enqueued;
        not_empty_.notify_one();
        return result;
    }

    /// Blocks until an item is available or the queue is closed and drained.
    std::optional<T> dequeue() {
        std::unique_lock lock(mutex_);
        not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        seqs_.pop_front();
        ++counters_.dequeued;
        not_full_.notify_one();
        return item;
    }

    void close() {
        std::lock_guard lock(mutex_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    size_t size() const {
        std::lock_guard lock(mutex_);
        return items_.size();
    }

    QueueCounters counters() const {
        std::lock_guard lock(mutex_);
        return counters_;
    }

    bool conservation_holds() const {
        std::lock_guard lock(mutex_);
        return counters_.enqueued == counters_.dequeued + counters_.dropped + items_.size();
    }

    size_t capacity() const { return capacity_; }
    QueuePolicy policy() const { return policy_; }

private:
    size_t capacity_;
    QueuePolicy policy_;
    mutable std::mutex mutex_;
    std::condition_variable not_empty_, not_full_;
    std::deque<T> items_;
    std::deque<uint64_t> seqs_;
    QueueCounters counters_;
    bool closed_ = false;
};

}  // namespace millwatch
