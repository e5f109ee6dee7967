#pragma once

#include <functional>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace raseg {

struct GradCheckReport {
    int checked = 0;
    int failed = 0;
    double max_rel_err = 0;
    std::string worst;

    bool ok() const { return failed == 0 && checked > 0; }
    void merge(const GradCheckReport& other);
};

// 64-bit central finite differences against the analytic reverse pass.
// `f` rebuilds the graph from the current values of `leaves` and returns the
// scalar loss. Step h = 1e-4 * max(1, |x|); relative error measured as
// |ga - gn| / max(1, |ga| + |gn|). When max_coords_per_leaf > 0, a random
// subset of coordinates is checked per leaf (deterministic in sample_seed).
GradCheckReport grad_check(const std::function<TensorD()>& f, const std::vector<TensorD>& leaves,
                           double tol, int max_coords_per_leaf = 0, uint64_t sample_seed = 1);

struct GradCheckSuiteResult {
    std::string name;
    double tol = 0;
    GradCheckReport report;
};

// Named finite-difference suites, shared by the test binaries and the CLI:
//  "tensor"  - every differentiable primitive
//  "encoder" - patch embed + self attention composites
//  "decoder" - binary RA block, softmax RA block (n=3), tiny decoder (C=8, D=1)
//  "losses"  - focal / IoU / cross-entropy on 4x4 toys
// An empty or "all" selector runs everything.
std::vector<GradCheckSuiteResult> run_gradcheck_suites(const std::string& module);

}  // namespace raseg
