#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ed2/common/errors.hpp"

namespace ed2::sd2 {

using Group = std::vector<std::size_t>;  // 0-based action indices

// Disjoint cover of {0..m-1}, kept in canonical form: each group ascending, groups ordered
// by their smallest element. Files and logs use 1-based indices.
class Partition {
public:
    Partition() = default;

    // Validates and canonicalises. Throws PartitionError on overlap, gap or out-of-range.
    static Partition from_groups(std::vector<Group> groups, std::size_t action_width);
    // Same, from 1-based indices as they appear in files.
    static Partition from_one_based(const std::vector<std::vector<long long>>& groups, std::size_t action_width);

    const std::vector<Group>& groups() const { return groups_; }
    std::size_t size() const { return groups_.size(); }
    std::size_t action_width() const { return action_width_; }
    const Group& operator[](std::size_t i) const { return groups_[i]; }

    // "{{1,2,3},{4,5,6}}"
    std::string to_string() const;
    // [[1,2,3],[4,5,6]]
    nlohmann::json to_json() const;

    bool operator==(const Partition&) const = default;

private:
    std::vector<Group> groups_;
    std::size_t action_width_ = 0;
};

class PartitionError : public InvalidInput {
public:
    enum class Kind { overlap, gap, out_of_range, empty_group };

    PartitionError(Kind kind, long long index, const std::string& what)
        : InvalidInput(what), kind_(kind), index_(index) {}

    Kind kind() const noexcept { return kind_; }
    // Offending index, 1-based.
    long long index() const noexcept { return index_; }

private:
    Kind kind_;
    long long index_;
};

std::string group_to_string(const Group& g);

// {{1},...,{m}}
Partition complete_decomposition(std::size_t action_width);
// {{1..m}}
Partition single_group(std::size_t action_width);

// Reads a JSON list of integer lists (1-based) and validates it against m.
Partition load_prior_partition(const std::filesystem::path& path, std::size_t action_width);
Partition parse_prior_partition(const std::string& text, std::size_t action_width);
void save_partition(const Partition& partition, const std::filesystem::path& path);

// Each index assigned uniformly to one of k labels, redrawn until no label is empty.
// Throws InvalidInput unless 1 <= k <= m.
Partition random_partition(std::size_t action_width, std::size_t k, std::uint64_t seed);

}  // namespace ed2::sd2
