#pragma once

// Thin RAII layer over FFTW's real-to-complex 2-D transforms. Plans are built
// once per size with FFTW_ESTIMATE (deterministic algorithm choice) and
// executed through the new-array interface, which is thread-safe.

#include <complex>
#include <cstddef>
#include <memory>

namespace lqg::detail {

struct FftwDeleter {
  void operator()(void* p) const noexcept;
};

/// 64-byte aligned buffer of T allocated through fftw_malloc.
template <typename T>
class AlignedBuffer {
 public:
  AlignedBuffer() = default;
  explicit AlignedBuffer(std::size_t n);
  T* data() noexcept { return ptr_.get(); }
  const T* data() const noexcept { return ptr_.get(); }
  T& operator[](std::size_t i) noexcept { return ptr_.get()[i]; }
  const T& operator[](std::size_t i) const noexcept { return ptr_.get()[i]; }
  std::size_t size() const noexcept { return n_; }

 private:
  std::unique_ptr<T, FftwDeleter> ptr_;
  std::size_t n_ = 0;
};

using RealBuffer = AlignedBuffer<double>;
using ComplexBuffer = AlignedBuffer<std::complex<double>>;

/// Square M x M real transform pair. The half spectrum has M x (M/2 + 1) bins.
class Fft2d {
 public:
  explicit Fft2d(int m);
  int size() const noexcept { return m_; }
  std::size_t real_size() const noexcept { return static_cast<std::size_t>(m_) * m_; }
  std::size_t spectrum_size() const noexcept { return static_cast<std::size_t>(m_) * (m_ / 2 + 1); }

  /// Unnormalized forward transform; `in` is not modified.
  void forward(const RealBuffer& in, ComplexBuffer& out) const;
  /// Unnormalized inverse transform; `in` is destroyed.
  void inverse(ComplexBuffer& in, RealBuffer& out) const;

 private:
  int m_;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

}  // namespace lqg::detail
