#include "blindmimo/rng.hpp"

#include <cmath>

namespace blindmimo {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t label_hash(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view experiment,
                          std::uint64_t point_index, std::uint64_t trial_index) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ label_hash(experiment));
  h = splitmix64(h ^ point_index);
  h = splitmix64(h ^ (trial_index * 0xd6e8feb86659fd93ULL));
  return h;
}

Rng make_stream(std::uint64_t master, std::string_view experiment,
                std::uint64_t point_index, std::uint64_t trial_index) {
  return Rng(derive_seed(master, experiment, point_index, trial_index));
}

void fill_complex_normal(Rng& rng, CMatrix& out, double variance) {
  std::normal_distribution<double> normal(0.0, std::sqrt(variance / 2.0));
  cplx* p = out.data();
  const Eigen::Index count = out.size();
  for (Eigen::Index i = 0; i < count; ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    p[i] = cplx(re, im);
  }
}

cplx complex_normal(Rng& rng, double variance) {
  std::normal_distribution<double> normal(0.0, std::sqrt(variance / 2.0));
  const double re = normal(rng);
  const double im = normal(rng);
  return {re, im};
}

}  // namespace blindmimo
