#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <new>
#include <utility>

namespace lqg::detail {

void FftwDeleter::operator()(void* p) const noexcept { fftw_free(p); }

template <typename T>
AlignedBuffer<T>::AlignedBuffer(std::size_t n)
    : ptr_(static_cast<T*>(fftw_malloc(sizeof(T) * n))), n_(n) {
  if (!ptr_) throw std::bad_alloc();
}

template class AlignedBuffer<double>;
template class AlignedBuffer<std::complex<double>>;

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanPair {
  fftw_plan forward;
  fftw_plan inverse;
};

// Plans live for the whole process; FFTW plans are cheap to keep around.
PlanPair plans_for(int m) {
  static std::map<int, PlanPair> cache;
  std::lock_guard lock(planner_mutex());
  if (auto it = cache.find(m); it != cache.end()) return it->second;
  RealBuffer real(static_cast<std::size_t>(m) * m);
  ComplexBuffer spec(static_cast<std::size_t>(m) * (m / 2 + 1));
  auto* cplx = reinterpret_cast<fftw_complex*>(spec.data());
  PlanPair p{fftw_plan_dft_r2c_2d(m, m, real.data(), cplx, FFTW_ESTIMATE),
             fftw_plan_dft_c2r_2d(m, m, cplx, real.data(), FFTW_ESTIMATE)};
  cache.emplace(m, p);
  return p;
}

}  // namespace

Fft2d::Fft2d(int m) : m_(m) {
  const PlanPair p = plans_for(m);
  forward_plan_ = p.forward;
  inverse_plan_ = p.inverse;
}

void Fft2d::forward(const RealBuffer& in, ComplexBuffer& out) const {
  // r2c does not touch its input, FFTW's signature is just not const-correct.
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), const_cast<double*>(in.data()),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

void Fft2d::inverse(ComplexBuffer& in, RealBuffer& out) const {
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_),
                       reinterpret_cast<fftw_complex*>(in.data()), out.data());
}

}  // namespace lqg::detail
