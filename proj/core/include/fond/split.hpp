#pragma once

// Class-to-domain assignment for the domain-linked setting. One domain is the
// held-out target; of the K remaining source domains, every domain-linked class
// appears in exactly one and every domain-shared class in exactly K-1.

#include "fond/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fond {

enum class SharedSetting { low, high };

std::string to_string(SharedSetting s);
SharedSetting parse_shared_setting(const std::string& text);

// Public benchmark class counts with their fixed shared-class sizes.
enum class TablePreset { pacs, vlcs, office_home };

struct PresetSizes {
    std::size_t num_classes;
    std::size_t low_shared;
    std::size_t high_shared;
};
PresetSizes preset_sizes(TablePreset preset);

// |Y_S| for a class count: the preset value when num_classes matches a preset
// (7, 5, 65), otherwise round(n/3) or round(2n/3) clamped to [1, n-1].
std::size_t shared_class_count(std::size_t num_classes, SharedSetting setting);

struct SplitPlan {
    int target_domain = 0;
    std::vector<int> source_domains;
    std::vector<int> shared_classes;
    std::vector<int> linked_classes;
    std::map<int, std::vector<int>> assignment;  // class -> source domains holding it
    std::string setting;                         // "Low", "High" or "explicit:<n>"
    std::uint64_t seed = 0;

    bool is_linked(int label) const;
    bool is_shared(int label) const;
    // Indexed by class id for classes [0, num_classes).
    std::vector<std::uint8_t> linked_mask(std::size_t num_classes) const;
    std::vector<int> classes() const;  // Y_T, sorted

    friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

struct SplitRequest {
    std::optional<SharedSetting> setting = SharedSetting::high;
    std::optional<std::size_t> shared_count;  // overrides `setting` when set
};

// Throws ConfigError when |Y_S| would fall outside [1, |Y_T| - 1] or the
// domain/class counts are too small.
SplitPlan make_split_plan(const std::vector<int>& classes, std::size_t num_domains_total,
                          int target_domain, const SplitRequest& request, std::uint64_t seed);

// Full invariant check for a plan produced by make_split_plan. Throws ContractError.
void validate_split_plan(const SplitPlan& plan, std::size_t num_domains_total);

// Leave-one-source-domain-out view: `held_out` becomes the target, its
// assignments are removed, and classes are regrouped by how many remaining
// domains hold them (one -> linked, several -> shared). Classes held only by
// `held_out` drop out of the class set.
SplitPlan fold_plan(const SplitPlan& plan, int held_out);

std::string format_split_plan(const SplitPlan& plan);
SplitPlan parse_split_plan(const std::string& text);
void save_split_plan(const SplitPlan& plan, const std::filesystem::path& path);
SplitPlan load_split_plan(const std::filesystem::path& path);

struct SplitData {
    std::vector<Sample> source_pool;  // all source samples allowed by the assignment
    std::vector<Sample> train;        // ~80% of every (domain, class) cell of the pool
    std::vector<Sample> validation;   // the rest
    std::vector<Sample> target;       // every target-domain sample with a label in Y_T
};

// Throws PlanMismatchError if the dataset holds a class or domain the plan does not cover.
SplitData apply_split(const Dataset& data, const SplitPlan& plan, double validation_fraction,
                      std::uint64_t validation_seed);

}  // namespace fond
