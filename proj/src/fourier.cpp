#include "lambda_lab/fourier.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <mutex>
#include <numbers>

namespace lambda_lab::fourier {

namespace {

struct PlanPair {
  fftw_plan r2c;
  fftw_plan c2r;
};

// FFTW planning is not thread safe; execution of an existing plan on fresh
// arrays is. Plans live for the whole process.
std::mutex plan_mutex;

PlanPair plans_for(const PeriodicGrid& grid) {
  static std::map<std::array<int, 4>, PlanPair> cache;
  std::array<int, 4> key{grid.dim(), grid.res(0), grid.res(1), grid.dim() == 3 ? grid.res(2) : 0};
  std::lock_guard<std::mutex> lock(plan_mutex);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  int dims[3] = {grid.res(0), grid.res(1), grid.dim() == 3 ? grid.res(2) : 1};
  const std::size_t n_real = grid.node_count();
  const std::size_t n_cplx = n_real / dims[grid.dim() - 1] * (dims[grid.dim() - 1] / 2 + 1);
  double* r = fftw_alloc_real(n_real);
  fftw_complex* c = fftw_alloc_complex(n_cplx);
  PlanPair p;
  p.r2c = fftw_plan_dft_r2c(grid.dim(), dims, r, c, FFTW_ESTIMATE);
  p.c2r = fftw_plan_dft_c2r(grid.dim(), dims, c, r, FFTW_ESTIMATE);
  fftw_free(r);
  fftw_free(c);
  cache.emplace(key, p);
  return p;
}

// Aligned scratch buffers matching the alignment used at planning time.
struct RealBuffer {
  explicit RealBuffer(std::size_t n) : p(fftw_alloc_real(n)) {}
  ~RealBuffer() { fftw_free(p); }
  RealBuffer(const RealBuffer&) = delete;
  RealBuffer& operator=(const RealBuffer&) = delete;
  double* p;
};

struct ComplexBuffer {
  explicit ComplexBuffer(std::size_t n) : p(fftw_alloc_complex(n)) {}
  ~ComplexBuffer() { fftw_free(p); }
  ComplexBuffer(const ComplexBuffer&) = delete;
  ComplexBuffer& operator=(const ComplexBuffer&) = delete;
  fftw_complex* p;
};

}  // namespace

Transform::Transform(const PeriodicGrid& grid) : grid_(grid) {
  const PlanPair p = plans_for(grid);
  r2c_ = p.r2c;
  c2r_ = p.c2r;

  const int n = grid.dim();
  const int last = grid.res(n - 1) / 2 + 1;
  std::array<int, 3> ext{1, 1, 1};
  for (int a = 0; a < n; ++a) ext[a] = grid.res(a);
  ext[n - 1] = last;
  const std::size_t count = static_cast<std::size_t>(ext[0]) * ext[1] * ext[2];
  wave_.resize(count);
  for (std::size_t m = 0; m < count; ++m) {
    std::size_t rem = m;
    std::array<double, 3> k{0.0, 0.0, 0.0};
    for (int a = n - 1; a >= 0; --a) {
      int idx = static_cast<int>(rem % ext[a]);
      rem /= ext[a];
      int freq = (a == n - 1) ? idx : (idx <= (grid.res(a) - 1) / 2 ? idx : idx - grid.res(a));
      k[a] = 2.0 * std::numbers::pi * freq / grid.period(a);
    }
    wave_[m] = k;
  }
}

Spectrum Transform::forward(std::span<const double> values) const {
  const std::size_t n_real = grid_.node_count();
  RealBuffer in(n_real);
  ComplexBuffer out(wave_.size());
  std::memcpy(in.p, values.data(), n_real * sizeof(double));
  fftw_execute_dft_r2c(static_cast<fftw_plan>(r2c_), in.p, out.p);
  Spectrum s(wave_.size());
  std::memcpy(static_cast<void*>(s.data()), out.p, wave_.size() * sizeof(fftw_complex));
  return s;
}

std::vector<double> Transform::inverse(const Spectrum& spec) const {
  const std::size_t n_real = grid_.node_count();
  ComplexBuffer in(wave_.size());
  RealBuffer out(n_real);
  std::memcpy(in.p, static_cast<const void*>(spec.data()), wave_.size() * sizeof(fftw_complex));
  fftw_execute_dft_c2r(static_cast<fftw_plan>(c2r_), in.p, out.p);
  std::vector<double> v(out.p, out.p + n_real);
  const double scale = 1.0 / static_cast<double>(n_real);
  for (double& x : v) x *= scale;
  return v;
}

std::vector<double> Transform::derivative(std::span<const double> values, int axis) const {
  Spectrum s = forward(values);
  for (std::size_t m = 0; m < s.size(); ++m) s[m] *= Complex(0.0, wave_[m][axis]);
  return inverse(s);
}

std::vector<double> Transform::second_derivative(std::span<const double> values, int a,
                                                 int b) const {
  Spectrum s = forward(values);
  for (std::size_t m = 0; m < s.size(); ++m) s[m] *= -wave_[m][a] * wave_[m][b];
  return inverse(s);
}

std::vector<std::vector<double>> Transform::gradient(std::span<const double> values) const {
  const Spectrum s = forward(values);
  std::vector<std::vector<double>> out;
  out.reserve(grid_.dim());
  Spectrum t(s.size());
  for (int a = 0; a < grid_.dim(); ++a) {
    for (std::size_t m = 0; m < s.size(); ++m) t[m] = s[m] * Complex(0.0, wave_[m][a]);
    out.push_back(inverse(t));
  }
  return out;
}

std::vector<double> Transform::divergence(const std::vector<std::vector<double>>& flux) const {
  Spectrum acc(wave_.size(), Complex(0.0, 0.0));
  for (int a = 0; a < grid_.dim(); ++a) {
    const Spectrum s = forward(flux[a]);
    for (std::size_t m = 0; m < s.size(); ++m) acc[m] += s[m] * Complex(0.0, wave_[m][a]);
  }
  return inverse(acc);
}

}  // namespace lambda_lab::fourier
