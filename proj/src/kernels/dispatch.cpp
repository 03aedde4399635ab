#include <atomic>

#include "lmmsdp/errors.hpp"
#include "lmmsdp/kernels.hpp"

namespace lmmsdp::kernels {

const Table& avx2_table_unchecked();

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() { return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar; }

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

bool supported(Isa isa) { return isa == Isa::Scalar || cpu_has_avx2(); }

const Table& avx2_table() {
  if (!cpu_has_avx2()) throw NotAvailable("AVX2/FMA kernels not supported on this CPU");
  return avx2_table_unchecked();
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

const Table& active() {
  return active_isa() == Isa::Avx2 ? avx2_table_unchecked() : scalar_table();
}

void select(Isa isa) {
  if (!supported(isa)) throw NotAvailable("requested kernel ISA is not supported on this CPU");
  current().store(isa, std::memory_order_relaxed);
}

void select_auto() { current().store(detect(), std::memory_order_relaxed); }

std::string_view name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

Isa parse_isa(std::string_view text) {
  if (text == "scalar") return Isa::Scalar;
  if (text == "avx2") return Isa::Avx2;
  throw InvalidInput("unknown kernel ISA '" + std::string(text) + "'");
}

}  // namespace lmmsdp::kernels
