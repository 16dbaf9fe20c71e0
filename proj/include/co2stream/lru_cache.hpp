#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <list>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <utility>

namespace co2stream {

/// Bounded LRU map whose entries expire `ttl` after insertion. Thread-safe.
template <typename Key, typename Value, typename Clock = std::chrono::steady_clock>
class LruCache {
 public:
  using TimePoint = typename Clock::time_point;

  LruCache(std::size_t capacity, typename Clock::duration ttl, std::function<TimePoint()> now = &Clock::now)
      : capacity_(capacity), ttl_(ttl), now_(std::move(now)) {}

  std::optional<Value> get(const Key& key) {
    std::lock_guard lock(mutex_);
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    if (now_() >= it->second->expires) {
      order_.erase(it->second);
      index_.erase(it);
      return std::nullopt;
    }
    order_.splice(order_.begin(), order_, it->second);
    return it->second->value;
  }

  void put(const Key& key, Value value) {
    if (capacity_ == 0) return;
    std::lock_guard lock(mutex_);
    const TimePoint expires = now_() + ttl_;
    if (auto it = index_.find(key); it != index_.end()) {
      it->second->value = std::move(value);
      it->second->expires = expires;
      order_.splice(order_.begin(), order_, it->second);
      return;
    }
    order_.push_front(Node{key, std::move(value), expires});
    index_[key] = order_.begin();
    if (order_.size() > capacity_) {
      index_.erase(order_.back().key);
      order_.pop_back();
    }
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return order_.size();
  }

 private:
  struct Node {
    Key key;
    Value value;
    TimePoint expires;
  };

  std::size_t capacity_;
  typename Clock::duration ttl_;
  std::function<TimePoint()> now_;
  mutable std::mutex mutex_;
  std::list<Node> order_;
  std::unordered_map<Key, typename std::list<Node>::iterator> index_;
};

}  // namespace co2stream
