#include "dbar/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "dbar/error.hpp"

namespace dbar {

namespace {

constexpr char kMagic[8] = {'D', 'B', 'A', 'R', 'D', 'A', 'T', 'A'};
constexpr std::size_t kRawHeaderBytes = 28;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  std::uint64_t bits = 0;
  static_assert(sizeof(T) <= sizeof(bits));
  std::memcpy(&bits, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

template <typename T>
T get_le(const std::vector<std::uint8_t>& in, std::size_t offset) {
  if (offset + sizeof(T) > in.size()) {
    throw ParseError("RawF64: truncated at byte offset " + std::to_string(offset));
  }
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(in[offset + i]) << (8 * i);
  T value;
  std::memcpy(&value, &bits, sizeof(T));
  return value;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& tok, std::size_t line, const char* what) {
  T value{};
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw ParseError("CSV line " + std::to_string(line) + ": bad " + what + " '" + tok + "'");
  }
  return value;
}

}  // namespace

Dataset::Dataset(std::vector<Example> examples, std::size_t d, std::size_t m, DomainMode mode)
    : examples_(std::move(examples)), d_(d), m_(m), mode_(mode) {
  if (d_ == 0) throw ValidationError("dataset dimension must be positive");
  if (m_ == 0) throw ValidationError("dataset class count must be positive");
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    const auto& ex = examples_[i];
    if (ex.x.size() != d_) {
      throw ValidationError("example " + std::to_string(i) + " has dimension " + std::to_string(ex.x.size()) +
                            ", expected " + std::to_string(d_));
    }
    if (ex.label >= m_) {
      throw ValidationError("example " + std::to_string(i) + " label " + std::to_string(ex.label) +
                            " >= class count " + std::to_string(m_));
    }
    if (!all_finite(ex.x)) throw ValidationError("example " + std::to_string(i) + " has non-finite features");
    if (mode_ == DomainMode::UnitBox) {
      for (double v : ex.x) {
        if (v < 0.0 || v > 1.0) {
          throw ValidationError("example " + std::to_string(i) + " leaves the unit box (" + format_double(v) + ")");
        }
      }
    }
  }
}

std::uint64_t Dataset::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : encode_raw(*this)) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string to_string(DomainMode mode) { return mode == DomainMode::UnitBox ? "unit" : "unbounded"; }

DomainMode domain_mode_from_string(const std::string& s) {
  if (s == "unit") return DomainMode::UnitBox;
  if (s == "unbounded") return DomainMode::Unbounded;
  throw ParseError("unknown domain mode '" + s + "'");
}

DataFormat data_format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return DataFormat::Csv;
  if (ext == ".bin" || ext == ".f64" || ext == ".raw") return DataFormat::RawF64;
  throw ConfigError("cannot infer data format from '" + path.string() + "' (use .csv or .bin)");
}

std::string encode_csv(const Dataset& ds) {
  std::string out = "# d=" + std::to_string(ds.dim()) + ",m=" + std::to_string(ds.num_classes()) +
                    ",mode=" + to_string(ds.mode()) + "\n";
  for (const auto& ex : ds.examples()) {
    for (double v : ex.x) {
      out += format_double(v);
      out += ',';
    }
    out += std::to_string(ex.label);
    out += '\n';
  }
  return out;
}

Dataset decode_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("CSV line 1: missing header");
  line = trim(line);
  if (line.rfind('#', 0) != 0) throw ParseError("CSV line 1: header must start with '#'");

  std::size_t d = 0, m = 0;
  std::string mode;
  std::stringstream header(line.substr(1));
  std::string field;
  while (std::getline(header, field, ',')) {
    field = trim(field);
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw ParseError("CSV line 1: malformed header field '" + field + "'");
    const auto key = trim(field.substr(0, eq));
    const auto val = trim(field.substr(eq + 1));
    if (key == "d") {
      d = parse_number<std::size_t>(val, 1, "d");
    } else if (key == "m") {
      m = parse_number<std::size_t>(val, 1, "m");
    } else if (key == "mode") {
      mode = val;
    } else {
      throw ParseError("CSV line 1: unknown header key '" + key + "'");
    }
  }
  if (d == 0 || m == 0 || mode.empty()) throw ParseError("CSV line 1: header needs d, m and mode");
  const DomainMode dm = domain_mode_from_string(mode);

  std::vector<Example> examples;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> toks;
    std::stringstream row(line);
    std::string tok;
    while (std::getline(row, tok, ',')) toks.push_back(trim(tok));
    if (toks.size() != d + 1) {
      throw ParseError("CSV line " + std::to_string(lineno) + ": expected " + std::to_string(d + 1) +
                       " fields, got " + std::to_string(toks.size()));
    }
    Example ex;
    ex.x.reserve(d);
    for (std::size_t i = 0; i < d; ++i) ex.x.push_back(parse_number<double>(toks[i], lineno, "feature"));
    ex.label = parse_number<Label>(toks[d], lineno, "label");
    examples.push_back(std::move(ex));
  }
  return Dataset(std::move(examples), d, m, dm);
}

std::vector<std::uint8_t> encode_raw(const Dataset& ds) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(kRawHeaderBytes + ds.size() * (ds.dim() * 8 + 4));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.dim()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.num_classes()));
  out.push_back(static_cast<std::uint8_t>(ds.mode()));
  out.insert(out.end(), 3, 0);
  put_le<std::uint64_t>(out, ds.size());
  for (const auto& ex : ds.examples()) {
    for (double v : ex.x) put_le<double>(out, v);
    put_le<std::uint32_t>(out, ex.label);
  }
  return out;
}

Dataset decode_raw(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("RawF64: magic 'DBARDATA' missing at byte offset 0");
  }
  const auto d = get_le<std::uint32_t>(bytes, 8);
  const auto m = get_le<std::uint32_t>(bytes, 12);
  if (bytes.size() < 17) throw ParseError("RawF64: truncated at byte offset 16");
  const auto mode_byte = bytes[16];
  if (mode_byte > 1) throw ParseError("RawF64: invalid mode byte at offset 16");
  const auto count = get_le<std::uint64_t>(bytes, 20);
  if (d == 0) throw ParseError("RawF64: zero dimension at byte offset 8");

  const std::size_t record = static_cast<std::size_t>(d) * 8 + 4;
  if ((bytes.size() - kRawHeaderBytes) != count * record) {
    throw ParseError("RawF64: payload of " + std::to_string(bytes.size() - kRawHeaderBytes) +
                     " bytes does not hold " + std::to_string(count) + " records");
  }
  std::vector<Example> examples(count);
  std::size_t off = kRawHeaderBytes;
  for (auto& ex : examples) {
    ex.x.resize(d);
    for (auto& v : ex.x) {
      v = get_le<double>(bytes, off);
      off += 8;
    }
    ex.label = get_le<std::uint32_t>(bytes, off);
    off += 4;
  }
  return Dataset(std::move(examples), d, m, static_cast<DomainMode>(mode_byte));
}

Dataset load_dataset(const std::filesystem::path& path, DataFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (format == DataFormat::RawF64) return decode_raw(bytes);
  return decode_csv(std::string(bytes.begin(), bytes.end()));
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path, DataFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write dataset '" + path.string() + "'");
  if (format == DataFormat::RawF64) {
    const auto bytes = encode_raw(ds);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  } else {
    const auto text = encode_csv(ds);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace dbar
