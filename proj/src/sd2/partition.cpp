#include "ed2/sd2/partition.hpp"

#include "ed2/common/rng.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace ed2::sd2 {

Partition Partition::from_groups(std::vector<Group> groups, std::size_t action_width) {
    std::vector<int> seen(action_width, 0);
    for (auto& g : groups) {
        if (g.empty()) throw PartitionError(PartitionError::Kind::empty_group, 0, "partition has an empty group");
        for (auto i : g) {
            if (i >= action_width) {
                throw PartitionError(PartitionError::Kind::out_of_range, static_cast<long long>(i) + 1,
                                     "partition index " + std::to_string(i + 1) + " out of range 1.." +
                                         std::to_string(action_width));
            }
            if (seen[i]++) {
                throw PartitionError(PartitionError::Kind::overlap, static_cast<long long>(i) + 1,
                                     "partition index " + std::to_string(i + 1) + " appears in more than one group");
            }
        }
        std::sort(g.begin(), g.end());
    }
    for (std::size_t i = 0; i < action_width; ++i) {
        if (!seen[i]) {
            throw PartitionError(PartitionError::Kind::gap, static_cast<long long>(i) + 1,
                                 "partition index " + std::to_string(i + 1) + " is not covered");
        }
    }
    std::sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) { return a.front() < b.front(); });
    Partition p;
    p.groups_ = std::move(groups);
    p.action_width_ = action_width;
    return p;
}

Partition Partition::from_one_based(const std::vector<std::vector<long long>>& groups, std::size_t action_width) {
    std::vector<Group> zero_based;
    for (const auto& g : groups) {
        Group z;
        for (long long i : g) {
            if (i < 1 || static_cast<std::size_t>(i) > action_width) {
                throw PartitionError(PartitionError::Kind::out_of_range, i,
                                     "partition index " + std::to_string(i) + " out of range 1.." +
                                         std::to_string(action_width));
            }
            z.push_back(static_cast<std::size_t>(i - 1));
        }
        zero_based.push_back(std::move(z));
    }
    return from_groups(std::move(zero_based), action_width);
}

std::string group_to_string(const Group& g) {
    std::string s = "{";
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (k) s += ',';
        s += std::to_string(g[k] + 1);
    }
    return s + "}";
}

std::string Partition::to_string() const {
    std::string s = "{";
    for (std::size_t k = 0; k < groups_.size(); ++k) {
        if (k) s += ',';
        s += group_to_string(groups_[k]);
    }
    return s + "}";
}

nlohmann::json Partition::to_json() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& g : groups_) {
        nlohmann::json row = nlohmann::json::array();
        for (auto i : g) row.push_back(i + 1);
        out.push_back(row);
    }
    return out;
}

Partition complete_decomposition(std::size_t action_width) {
    if (action_width == 0) throw InvalidInput("complete_decomposition: m must be >= 1");
    std::vector<Group> groups;
    for (std::size_t i = 0; i < action_width; ++i) groups.push_back({i});
    return Partition::from_groups(std::move(groups), action_width);
}

Partition single_group(std::size_t action_width) {
    if (action_width == 0) throw InvalidInput("single_group: m must be >= 1");
    Group g(action_width);
    for (std::size_t i = 0; i < action_width; ++i) g[i] = i;
    return Partition::from_groups({g}, action_width);
}

Partition parse_prior_partition(const std::string& text, std::size_t action_width) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidInput(std::string("partition file is not valid JSON: ") + e.what());
    }
    if (!j.is_array()) throw InvalidInput("partition file must hold a list of integer lists");
    std::vector<std::vector<long long>> groups;
    for (const auto& g : j) {
        if (!g.is_array()) throw InvalidInput("partition file must hold a list of integer lists");
        std::vector<long long> row;
        for (const auto& x : g) {
            if (!x.is_number_integer()) throw InvalidInput("partition entries must be integers");
            row.push_back(x.get<long long>());
        }
        groups.push_back(std::move(row));
    }
    return Partition::from_one_based(groups, action_width);
}

Partition load_prior_partition(const std::filesystem::path& path, std::size_t action_width) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot read partition file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_prior_partition(buf.str(), action_width);
}

void save_partition(const Partition& partition, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write partition " + path.string());
    out << partition.to_json().dump() << '\n';
}

Partition random_partition(std::size_t action_width, std::size_t k, std::uint64_t seed) {
    if (k < 1 || k > action_width) {
        throw InvalidInput("random_partition: need 1 <= k <= m, got k=" + std::to_string(k) +
                           ", m=" + std::to_string(action_width));
    }
    Rng rng = make_rng(seed, "random_partition");
    std::uniform_int_distribution<std::size_t> label(0, k - 1);
    for (;;) {
        std::vector<Group> groups(k);
        for (std::size_t i = 0; i < action_width; ++i) groups[label(rng)].push_back(i);
        if (std::none_of(groups.begin(), groups.end(), [](const Group& g) { return g.empty(); })) {
            return Partition::from_groups(std::move(groups), action_width);
        }
    }
}

}  // namespace ed2::sd2
