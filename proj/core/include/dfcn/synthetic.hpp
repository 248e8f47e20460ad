#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dfcn/data.hpp"

namespace dfcn::synthetic {

// Cohort shape: class sizes and, per feature, how many subjects of each class
// lack the value.
struct Profile {
    std::string name;
    std::size_t negatives = 0;
    std::size_t positives = 0;
    std::vector<std::size_t> missing_negative;
    std::vector<std::size_t> missing_positive;
    bool with_views = false;  // emit a PA/AP view column
};

// Training-site (640 subjects, 382 positive) and test-site (488, 291) shapes
// with the per-parameter missing counts of the real cohorts.
Profile training_site_profile();
Profile test_site_profile();
Profile profile_by_name(const std::string& name);

// Raw (un-normalized) lab-like values driven by a shared latent severity and
// a label effect that differs in strength per feature. Exactly
// missing_{negative,positive}[f] subjects per class lack feature f; the
// leukocyte differential and the blood count panel go missing together.
Dataset generate(const Profile& profile, std::uint64_t seed);

// Generic cohort without missingness pattern, for tests and benchmarks.
Dataset generate_simple(std::size_t n_records, std::size_t n_features, double missing_rate, std::uint64_t seed);

}  // namespace dfcn::synthetic
