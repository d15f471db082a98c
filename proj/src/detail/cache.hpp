#pragma once

// Per-grid memo of the first eigenpair and the homogeneous solution U. Entries hold
// weak references so a freed grid whose address is reused never hits a stale entry.

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

#include "splap/grid.hpp"
#include "splap/plap.hpp"

namespace splap::detail {

template <class Value>
class GridMemo {
 public:
  using Key = std::tuple<const Grid*, double, double>;

  const Value& get(const GridPtr& g, double a, double b, const std::function<Value()>& make) {
    const Key key{g.get(), a, b};
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = map_.find(key);
      if (it != map_.end() && it->second.grid.lock() == g) return *it->second.value;
    }
    auto v = std::make_shared<Value>(make());
    std::lock_guard<std::mutex> lock(mu_);
    auto& slot = map_[key];
    if (slot.grid.lock() != g) slot = Entry{g, v};
    return *slot.value;
  }

 private:
  struct Entry {
    std::weak_ptr<const Grid> grid;
    std::shared_ptr<Value> value;
  };
  std::mutex mu_;
  std::map<Key, Entry> map_;
};

const EigenPair& eigenpair_cached(const GridPtr& g, double p);
const GridFunction& homogeneous_cached(const GridPtr& g, double p, double delta);

}  // namespace splap::detail
