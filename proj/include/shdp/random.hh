// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>

namespace shdp {

// Every sampler constructs its std distribution locally, so the engine state
// alone determines all future draws. Checkpoints serialize only the engine.
using Rng = std::mt19937_64;

Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t substream = 0);

double uniform01(Rng& rng);
double sample_normal(Rng& rng, double mean, double sd);
// Gamma with shape/rate parameterization.
double sample_gamma(Rng& rng, double shape, double rate);
double sample_beta(Rng& rng, double a, double b);
bool sample_bernoulli(Rng& rng, double p);

// Draws an index from unnormalized log-weights (max-subtracted internally).
int sample_log_categorical(Rng& rng, std::span<const double> log_weights);
int sample_categorical(Rng& rng, std::span<const double> weights);

std::string rng_to_string(const Rng& rng);
Rng rng_from_string(const std::string& text);

}  // namespace shdp
