// Copyright (c) the flowstab authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace flowstab {

struct CriterionResult {
  std::string id;
  std::string status;  // "pass" | "fail" | "skip"
  std::string detail;
};

/// Run the acceptance criteria on the pinned benchmark configuration.
/// level "full" runs everything including the refinement studies;
/// "quick" runs the fast subset and marks the rest skipped.
/// Progress lines (one per criterion) go to *progress when given.
std::vector<CriterionResult> run_acceptance_checks(const std::string& level,
                                                   std::ostream* progress);

}  // namespace flowstab
