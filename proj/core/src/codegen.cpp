#include "spamlab/codegen.hpp"

#include <algorithm>
#include <cctype>
#include <complex>
#include <fstream>
#include <mutex>
#include <string>

#include <fftw3.h>

#include "fft_lock.hpp"

#include "spamlab/error.hpp"
#include "spamlab/rng.hpp"

namespace spamlab::codegen {
namespace {

struct RegisterPair {
  int degree;
  std::uint32_t taps_a;  // Galois feedback masks, x^0 term included
  std::uint32_t taps_b;
};

constexpr std::uint32_t mask_of(std::initializer_list<int> exps) {
  std::uint32_t m = 1;
  for (int e : exps) m |= 1u << e;
  return m;
}

// Both polynomials of each pair are primitive (period 2^n - 1).
constexpr RegisterPair kE1Regs{13, mask_of({4, 3, 1}), mask_of({12, 11, 8})};
constexpr RegisterPair kE5BRegs{14, mask_of({10, 6, 1}), mask_of({13, 12, 2})};

std::vector<std::uint8_t> m_sequence(int degree, std::uint32_t taps, std::uint32_t state, int count) {
  const std::uint32_t top = 1u << degree;
  const std::uint32_t full = top - 1;
  state &= full;
  if (state == 0) state = 1;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(state & 1u);
    state <<= 1;
    if (state & top) state ^= taps | top;
  }
  return out;
}

void check_svid(int svid) {
  if (svid < kMinSvid || svid > kMaxSvid)
    throw DomainError("svid " + std::to_string(svid) + " outside 1..36");
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

PrnCode generate_code(int svid, Band band, std::uint64_t seed) {
  check_svid(svid);
  const auto& regs = band == Band::E1 ? kE1Regs : kE5BRegs;
  const int length = band_info(band).code_length;
  const int period = (1 << regs.degree) - 1;

  // Register A is shared by the whole family; register B's starting state
  // is keyed by (svid, band, seed), which is equivalent to a phase shift of
  // the second m-sequence in a Gold construction.
  const std::uint64_t key = derive_seed({seed, static_cast<std::uint64_t>(band), 0x5eedULL});
  const auto state_a = static_cast<std::uint32_t>(mix64(key) % static_cast<std::uint64_t>(period)) + 1u;
  const auto shift = derive_seed({key, static_cast<std::uint64_t>(svid)});
  const auto state_b = static_cast<std::uint32_t>(shift % static_cast<std::uint64_t>(period)) + 1u;

  auto a = m_sequence(regs.degree, regs.taps_a, state_a, length);
  auto b = m_sequence(regs.degree, regs.taps_b, state_b, length);

  PrnCode code;
  code.svid = svid;
  code.band = band;
  code.chips.resize(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) {
    auto bit = a[static_cast<std::size_t>(i)] ^ b[static_cast<std::size_t>(i)];
    code.chips[static_cast<std::size_t>(i)] = bit ? -1 : 1;
  }
  return code;
}

std::vector<PrnCode> load_codes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open code table " + path.string());

  std::vector<PrnCode> codes;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    auto line = trim(raw);
    if (line.empty()) continue;

    auto c1 = line.find(',');
    auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw ParseError("expected <band>,<svid>,<hex>", line_no);

    auto band = parse_band(trim(line.substr(0, c1)));
    if (!band) throw ParseError("unknown band '" + trim(line.substr(0, c1)) + "'", line_no);

    int svid = 0;
    try {
      std::size_t used = 0;
      auto field = trim(line.substr(c1 + 1, c2 - c1 - 1));
      svid = std::stoi(field, &used);
      if (used != field.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError("bad svid field", line_no);
    }
    if (svid < kMinSvid || svid > kMaxSvid) throw ParseError("svid out of range 1..36", line_no);

    auto hex = trim(line.substr(c2 + 1));
    const int length = band_info(*band).code_length;
    // The last hex digit may carry zero padding when the length is not a
    // multiple of four (E5B: 10230 chips -> 2558 digits).
    const std::size_t digits = static_cast<std::size_t>((length + 3) / 4);
    if (hex.size() != digits) {
      throw ParseError("expected " + std::to_string(length) + " chips (" + std::to_string(digits) +
                           " hex digits), got " + std::to_string(hex.size() * 4) + " chips",
                       line_no);
    }

    PrnCode code;
    code.svid = svid;
    code.band = *band;
    code.chips.reserve(static_cast<std::size_t>(length));
    for (std::size_t i = 0; i < hex.size(); ++i) {
      int v = hex_value(hex[i]);
      if (v < 0) throw ParseError(std::string("invalid hex digit '") + hex[i] + "'", line_no);
      for (int bit = 3; bit >= 0; --bit) {
        int b = (v >> bit) & 1;
        if (code.length() < length) {
          code.chips.push_back(b ? -1 : 1);
        } else if (b) {
          throw ParseError("non-zero padding bits after last chip", line_no);
        }
      }
    }
    codes.push_back(std::move(code));
  }
  return codes;
}

std::vector<double> circular_correlation(const PrnCode& a, const PrnCode& b) {
  if (a.length() != b.length()) throw DomainError("codes of different length");
  const int n = a.length();
  std::vector<std::complex<double>> fa(static_cast<std::size_t>(n)), fb(fa.size()), prod(fa.size());
  for (int i = 0; i < n; ++i) {
    fa[static_cast<std::size_t>(i)] = a.chips[static_cast<std::size_t>(i)];
    fb[static_cast<std::size_t>(i)] = b.chips[static_cast<std::size_t>(i)];
  }

  fftw_plan fwd_a, fwd_b, inv;
  {
    std::lock_guard lock(detail::fftw_mutex());
    auto* pa = reinterpret_cast<fftw_complex*>(fa.data());
    auto* pb = reinterpret_cast<fftw_complex*>(fb.data());
    auto* pp = reinterpret_cast<fftw_complex*>(prod.data());
    fwd_a = fftw_plan_dft_1d(n, pa, pa, FFTW_FORWARD, FFTW_ESTIMATE);
    fwd_b = fftw_plan_dft_1d(n, pb, pb, FFTW_FORWARD, FFTW_ESTIMATE);
    inv = fftw_plan_dft_1d(n, pp, pp, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  fftw_execute(fwd_a);
  fftw_execute(fwd_b);
  // corr[k] = sum_i a[i+k] b[i]
  for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = fa[i] * std::conj(fb[i]);
  fftw_execute(inv);
  {
    std::lock_guard lock(detail::fftw_mutex());
    fftw_destroy_plan(fwd_a);
    fftw_destroy_plan(fwd_b);
    fftw_destroy_plan(inv);
  }

  std::vector<double> out(static_cast<std::size_t>(n));
  const double norm = 1.0 / (static_cast<double>(n) * n);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = prod[i].real() * norm;
  return out;
}

CodeBook::CodeBook(std::vector<PrnCode> loaded, std::uint64_t seed) : seed_(seed) {
  for (auto& c : loaded) {
    loaded_[{c.svid, c.band}] = true;
    codes_[{c.svid, c.band}] = std::move(c);
  }
  for (Band band : {Band::E1, Band::E5B})
    for (int svid = kMinSvid; svid <= kMaxSvid; ++svid)
      if (!codes_.count({svid, band})) codes_[{svid, band}] = generate_code(svid, band, seed_);
}

const PrnCode& CodeBook::code(int svid, Band band) const {
  check_svid(svid);
  return codes_.at({svid, band});
}

}  // namespace spamlab::codegen
