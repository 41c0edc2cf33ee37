#include "spamlab/iq.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "spamlab/error.hpp"

namespace spamlab {
namespace {

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

std::filesystem::path meta_path(const std::filesystem::path& p) { return p.string() + ".meta"; }

}  // namespace

IqBuffer make_buffer(Band band, double sample_rate_hz, double epoch_s, double duration_s) {
  IqBuffer b;
  b.band = band;
  b.sample_rate_hz = sample_rate_hz;
  b.epoch_s = epoch_s;
  b.samples.assign(static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz)), Sample{});
  return b;
}

void write_iq(const std::filesystem::path& path, const IqBuffer& buffer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  std::vector<std::uint32_t> words;
  words.reserve(buffer.samples.size() * 2);
  for (const auto& s : buffer.samples) {
    words.push_back(to_le(std::bit_cast<std::uint32_t>(static_cast<float>(s.real()))));
    words.push_back(to_le(std::bit_cast<std::uint32_t>(static_cast<float>(s.imag()))));
  }
  out.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));

  std::ofstream meta(meta_path(path));
  meta.precision(17);
  meta << "sample_rate_hz=" << buffer.sample_rate_hz << "\n"
       << "epoch_s=" << buffer.epoch_s << "\n"
       << "band=" << to_string(buffer.band) << "\n";
}

IqBuffer read_iq(const std::filesystem::path& path) {
  std::ifstream meta(meta_path(path));
  if (!meta) throw ParseError("missing sidecar " + meta_path(path).string());
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(meta, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", line_no);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  IqBuffer b;
  try {
    b.sample_rate_hz = std::stod(kv.at("sample_rate_hz"));
    b.epoch_s = std::stod(kv.at("epoch_s"));
  } catch (const std::exception&) {
    throw ParseError("sidecar needs numeric sample_rate_hz and epoch_s");
  }
  auto band = kv.count("band") ? parse_band(kv["band"]) : std::optional<Band>(Band::E1);
  if (!band) throw ParseError("unknown band in sidecar");
  b.band = *band;

  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw ParseError("cannot open " + path.string());
  auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes % 8 != 0) throw ParseError("I/Q file size is not a multiple of 8 bytes");
  in.seekg(0);
  std::vector<std::uint32_t> words(bytes / 4);
  in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(bytes));
  b.samples.resize(words.size() / 2);
  for (std::size_t i = 0; i < b.samples.size(); ++i) {
    b.samples[i] = {std::bit_cast<float>(to_le(words[2 * i])), std::bit_cast<float>(to_le(words[2 * i + 1]))};
  }
  return b;
}

}  // namespace spamlab
