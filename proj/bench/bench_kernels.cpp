// Parallel kernels against their serial references on the paper-sized problem
// (N = 1024, N_r = 64, L = 4), plus one full decode per configuration.

#include <benchmark/benchmark.h>

#include "blindmimo/blind_rx.hpp"
#include "blindmimo/channel.hpp"
#include "blindmimo/kernels.hpp"
#include "blindmimo/numerics.hpp"
#include "blindmimo/rng.hpp"
#include "blindmimo/waveform.hpp"

namespace bk = blindmimo::kernels;
using namespace blindmimo;

namespace {

constexpr int kN = 1024;
constexpr int kL = 4;

struct Problem {
  DftSubmatrix f;
  CMatrix y, h, xs;
  CVector x;
  RVector w;
  std::vector<CMatrix> hs;

  Problem(int n_r, int users) {
    Rng rng(7);
    f = build_dft_submatrix(kN, {0, 1, 2, 3});
    y.resize(kN, n_r);
    fill_complex_normal(rng, y);
    h.resize(kL, n_r);
    fill_complex_normal(rng, h);
    xs.resize(kN, users);
    fill_complex_normal(rng, xs);
    x = xs.col(0);
    w = x.cwiseAbs2();
    for (int u = 0; u < users; ++u) {
      CMatrix hu(kL, n_r);
      fill_complex_normal(rng, hu);
      hs.push_back(hu);
    }
  }
};

const Problem& problem(int n_r, int users) {
  static const Problem p64x1(64, 1), p64x4(64, 4), p256x1(256, 1);
  if (users == 4) return p64x4;
  return n_r == 256 ? p256x1 : p64x1;
}

template <auto Fn>
void run_correlate(benchmark::State& s) {
  const auto& p = problem(static_cast<int>(s.range(0)), 1);
  for (auto _ : s) benchmark::DoNotOptimize(Fn(p.f.columns, p.x, p.y));
}
template <auto Fn>
void run_gram(benchmark::State& s) {
  const auto& p = problem(64, 1);
  for (auto _ : s) benchmark::DoNotOptimize(Fn(p.f.columns, p.w));
}
template <auto Fn>
void run_synthesize(benchmark::State& s) {
  const auto& p = problem(static_cast<int>(s.range(0)), 1);
  for (auto _ : s) benchmark::DoNotOptimize(Fn(p.f.columns, p.h));
}
template <auto Fn>
void run_mrc(benchmark::State& s) {
  const auto& p = problem(static_cast<int>(s.range(0)), 1);
  const CMatrix b = p.f.columns * p.h;
  for (auto _ : s) benchmark::DoNotOptimize(Fn(p.y, b, nullptr));
}
template <auto Fn>
void run_per_row_ls(benchmark::State& s) {
  const auto& p = problem(64, 4);
  std::vector<CMatrix> bs;
  for (const auto& hu : p.hs) bs.push_back(p.f.columns * hu);
  for (auto _ : s) benchmark::DoNotOptimize(Fn(p.y, bs, 0.1, false, nullptr));
}
template <auto Fn>
void run_combine(benchmark::State& s) {
  const int users = static_cast<int>(s.range(0));
  const auto& p = problem(64, users);
  const std::vector<CMatrix> hs(p.hs.begin(), p.hs.begin() + users);
  for (auto _ : s) benchmark::DoNotOptimize(Fn(p.y, p.f.columns, hs, 0.1));
}

void decode(benchmark::State& s) {
  const int m = static_cast<int>(s.range(0));
  Rng rng(11);
  const auto pdp = pdp_by_name("peda");
  const auto f = build_dft_submatrix(kN, pdp.delays);
  const auto g = build_tx_symbol(rng, kN, m, rotational_pilots(kN, 1, m));
  const auto ch = sample_time_channel(pdp, exponential_corr(64, 0.0), rng);
  const auto y = apply_channel({&g}, {&ch}, f, 10.0, rng);
  BlindConfig cfg;
  cfg.qam_order = m;
  cfg.pilots = {g.pilots};
  for (auto _ : s) benchmark::DoNotOptimize(blind_decode_single(y, cfg));
}

}  // namespace

BENCHMARK(run_correlate<bk::correlate>)->Name("correlate/parallel")->Arg(64)->Arg(256);
BENCHMARK(run_correlate<bk::reference::correlate>)->Name("correlate/reference")->Arg(64)->Arg(256);
BENCHMARK(run_gram<bk::weighted_gram>)->Name("weighted_gram/parallel");
BENCHMARK(run_gram<bk::reference::weighted_gram>)->Name("weighted_gram/reference");
BENCHMARK(run_synthesize<bk::synthesize>)->Name("synthesize/parallel")->Arg(64)->Arg(256);
BENCHMARK(run_synthesize<bk::reference::synthesize>)->Name("synthesize/reference")->Arg(64)->Arg(256);
BENCHMARK(run_mrc<bk::mrc>)->Name("mrc/parallel")->Arg(64)->Arg(256);
BENCHMARK(run_mrc<bk::reference::mrc>)->Name("mrc/reference")->Arg(64)->Arg(256);
BENCHMARK(run_per_row_ls<bk::per_row_ls>)->Name("per_row_ls/parallel");
BENCHMARK(run_per_row_ls<bk::reference::per_row_ls>)->Name("per_row_ls/reference");
BENCHMARK(run_combine<bk::combine_factored>)->Name("combine_factored/parallel")->Arg(1)->Arg(4);
BENCHMARK(run_combine<bk::reference::combine_factored>)->Name("combine_factored/reference")->Arg(1)->Arg(4);
BENCHMARK(decode)->Name("blind_decode_single")->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
