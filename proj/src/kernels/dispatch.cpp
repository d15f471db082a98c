#include "splap/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace splap::kernels {

#if defined(SPLAP_HAVE_AVX2)
const KernelTable* avx2_table_impl();
#endif

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

const KernelTable* avx2_table() {
#if defined(SPLAP_HAVE_AVX2)
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok ? avx2_table_impl() : nullptr;
#else
  return nullptr;
#endif
}

Isa detect() {
  if (const char* env = std::getenv("SPLAP_ISA"); env && std::string(env) == "scalar")
    return Isa::scalar;
  return avx2_table() ? Isa::avx2 : Isa::scalar;
}

namespace {

const KernelTable* table_for(Isa isa) {
  if (isa == Isa::avx2) {
    if (const KernelTable* t = avx2_table()) return t;
  }
  return &scalar_table();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{table_for(detect())};
  return current;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

void select(Isa isa) { slot().store(table_for(isa), std::memory_order_release); }

}  // namespace splap::kernels
