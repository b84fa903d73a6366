#pragma once

#include "fedvuln/params.hpp"

namespace fedvuln {

/// Installs the scheme's adapters and rebuilds the hot mask. The head is hot
/// in every scheme; under `full` everything is hot and no adapter exists.
/// Expects a plain (unadapted) ParamSet.
ParamSet attach(const SchemeSpec& scheme, const ParamSet& params);

/// Weight update contributed by a lora/loha adapter to W1 (which = 0) or
/// W2 (which = 1) of `block`. Zero matrix for other schemes.
Matrix adapter_delta(const ParamSet& params, std::size_t block, int which);

/// Folds lora/loha updates and ia3 scales into the backbone weights and drops
/// those adapters. Prompt schemes are returned unchanged.
ParamSet effective_params(const ParamSet& params);

/// Hot entries divided by the backbone (unadapted model) entry count.
double hot_param_rate(const ParamSet& params);

}  // namespace fedvuln
