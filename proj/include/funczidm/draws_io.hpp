/*
 Chain persistence: a self-describing binary container with a JSON metadata
 header (dims, coefficient layout, basis spec, config, seed, acceptance
 summary) followed by float64 parameter blocks per retained draw, plus CSV
 export per parameter family.
*/
#pragma once

#include <string>
#include <vector>

#include "funczidm/sampler.hpp"

namespace funczidm {

void save_draws(const PosteriorDraws& draws, const std::string& path);
PosteriorDraws load_draws(const std::string& path);

// family: beta | r | eta | phi2 | kappa2 | tau2 | lambda2; one row per draw
void export_family_csv(const PosteriorDraws& draws, const std::string& family,
                       const std::string& path);

// pools retained draws of several chains (metadata taken from the first;
// chains must agree on layout and dims)
PosteriorDraws pool_chains(const std::vector<PosteriorDraws>& chains);

}  // namespace funczidm
