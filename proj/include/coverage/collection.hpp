#pragma once

#include "coverage/errors.hpp"
#include "coverage/schema.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace coverage {

struct Item {
    std::string id;
    std::string image;               // opaque path or URL; empty when absent
    std::optional<Labels> truth;     // full assignment (simulation only)
    std::optional<Labels> predicted; // classifier output, may be partial
};

// Ordered, immutable item collection.  Order is fixed at construction; all
// shuffling happens upstream with an explicit seed.
class ItemCollection {
public:
    ItemCollection() = default;

    ItemCollection(AttributeSchema schema, std::vector<Item> items)
        : schema_(std::move(schema)), items_(std::move(items)) {
        std::size_t with_truth = 0;
        index_.reserve(items_.size());
        for (std::size_t i = 0; i < items_.size(); ++i) {
            const auto& it = items_[i];
            if (it.id.empty()) throw ConfigError("item " + std::to_string(i) + " has an empty id");
            if (!index_.emplace(it.id, i).second) throw ConfigError("duplicate item id '" + it.id + "'");
            if (it.truth) {
                check_labels(*it.truth, it.id, /*require_full=*/true);
                ++with_truth;
            }
            if (it.predicted) check_labels(*it.predicted, it.id, /*require_full=*/false);
        }
        fully_labeled_ = with_truth == items_.size();
    }

    const AttributeSchema& schema() const { return schema_; }
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    const Item& operator[](std::size_t i) const { return items_[i]; }
    std::span<const Item> items() const { return items_; }

    // Every item carries a full truth assignment (simulation-ready).
    bool fully_labeled() const { return fully_labeled_; }
    bool partially_labeled() const { return !fully_labeled_; }

    std::optional<std::size_t> find(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t index_of(const std::string& id) const {
        if (auto i = find(id)) return *i;
        throw AnswerSourceError("unknown item id '" + id + "'");
    }

    const Labels& truth(std::size_t i) const {
        const auto& it = items_.at(i);
        if (!it.truth) throw PartialLabelError("item '" + it.id + "' has no truth labels");
        return *it.truth;
    }

    // Identity order 0..N-1.
    std::vector<std::size_t> natural_order() const {
        std::vector<std::size_t> order(items_.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        return order;
    }

private:
    void check_labels(const Labels& l, const std::string& id, bool require_full) const {
        if (l.size() != schema_.size())
            throw ConfigError("item '" + id + "' labels have wrong arity");
        for (std::size_t a = 0; a < l.size(); ++a) {
            if (l[a] == kUnspecified) {
                if (require_full) throw ConfigError("item '" + id + "' truth is missing attribute " +
                                                    schema_.attribute(a).name);
                continue;
            }
            if (l[a] < 0 || static_cast<std::size_t>(l[a]) >= schema_.cardinality(a))
                throw ConfigError("item '" + id + "' has out-of-range label");
        }
    }

    AttributeSchema schema_;
    std::vector<Item> items_;
    std::unordered_map<std::string, std::size_t> index_;
    bool fully_labeled_ = true;
};

// Number of items matching `p`; requires truth on every item.
inline std::size_t true_count(const ItemCollection& c, const Pattern& p) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < c.size(); ++i)
        if (match(c.truth(i), p)) ++n;
    return n;
}

// Same, restricted to a sub-order of item indices.
inline std::size_t true_count(const ItemCollection& c, std::span<const std::size_t> order, const Pattern& p) {
    std::size_t n = 0;
    for (auto i : order)
        if (match(c.truth(i), p)) ++n;
    return n;
}

} // namespace coverage
