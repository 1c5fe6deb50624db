#pragma once

#include <random>

#include "streamem/types.hpp"

namespace streamem {

// n draws of y = u * x + sqrt(lambda) * z with x ~ N(0,1), z ~ N(0, I_d).
// Per row the latent x is drawn first, then the d noise coordinates, so the
// output is reproducible given the generator state.
Matrix sample_ppca1(const Vector& u, double lambda, Eigen::Index n, std::mt19937_64& rng);

// n draws from sum_i omega_i Poisson(beta_i), one count per row. Per row the
// component index is drawn first, then the count.
Matrix sample_poisson_mixture(const Vector& weights, const Vector& means, Eigen::Index n,
                              std::mt19937_64& rng);

}  // namespace streamem
