#include "higgsflow/snapshot.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

namespace higgsflow {

namespace {

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

void put_u32(std::ostream& os, std::uint32_t v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_f64(std::ostream& os, double v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw InvalidInput("snapshot: truncated header");
  return to_little(v);
}

double get_f64(std::istream& is) {
  double v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw InvalidInput("snapshot: truncated data");
  return to_little(v);
}

void expect_magic(std::istream& is, const char* magic) {
  char m[4];
  if (!is.read(m, 4) || std::memcmp(m, magic, 4) != 0)
    throw InvalidInput(std::string("snapshot: missing ") + magic + " tag");
}

}  // namespace

void write_field(std::ostream& os, const FormField& f) {
  os.write("HFLD", 4);
  put_u32(os, kSnapshotVersion);
  put_u32(os, static_cast<std::uint32_t>(f.base().dim()));
  put_u32(os, static_cast<std::uint32_t>(f.base().resolution()));
  put_u32(os, static_cast<std::uint32_t>(f.rows()));
  put_u32(os, static_cast<std::uint32_t>(f.degree().p));
  put_u32(os, static_cast<std::uint32_t>(f.degree().q));
  put_u32(os, static_cast<std::uint32_t>(f.components()));
  put_u32(os, static_cast<std::uint32_t>(f.cols()));
  for (int c = 0; c < f.components(); ++c) {
    for (std::size_t pt = 0; pt < f.base().num_points(); ++pt) {
      const auto m = f.at(c, pt);
      for (int i = 0; i < f.rows(); ++i)
        for (int j = 0; j < f.cols(); ++j) {
          put_f64(os, m(i, j).real());
          put_f64(os, m(i, j).imag());
        }
    }
  }
  if (!os) throw InvalidInput("snapshot: write failed");
}

FormField read_field(std::istream& is) {
  expect_magic(is, "HFLD");
  const auto version = get_u32(is);
  if (version != kSnapshotVersion) throw InvalidInput("snapshot: unsupported format version");
  const int n = static_cast<int>(get_u32(is));
  const int N = static_cast<int>(get_u32(is));
  const int rank = static_cast<int>(get_u32(is));
  const int p = static_cast<int>(get_u32(is));
  const int q = static_cast<int>(get_u32(is));
  const int comps = static_cast<int>(get_u32(is));
  const int cols = static_cast<int>(get_u32(is));
  FormField f(TorusBase(n, N), rank, cols, {p, q});
  if (comps != f.components()) throw InvalidInput("snapshot: component count disagrees with bidegree");
  for (int c = 0; c < comps; ++c) {
    for (std::size_t pt = 0; pt < f.base().num_points(); ++pt) {
      auto m = f.at(c, pt);
      for (int i = 0; i < rank; ++i)
        for (int j = 0; j < cols; ++j) {
          const double re = get_f64(is);
          const double im = get_f64(is);
          m(i, j) = cplx(re, im);
        }
    }
  }
  return f;
}

void write_sections(std::ostream& os, const std::vector<NamedField>& sections) {
  os.write("HSEC", 4);
  put_u32(os, kSnapshotVersion);
  put_u32(os, static_cast<std::uint32_t>(sections.size()));
  for (const auto& [name, field] : sections) {
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_field(os, field);
  }
}

std::vector<NamedField> read_sections(std::istream& is) {
  expect_magic(is, "HSEC");
  if (get_u32(is) != kSnapshotVersion) throw InvalidInput("snapshot: unsupported format version");
  const auto count = get_u32(is);
  std::vector<NamedField> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get_u32(is);
    if (len > 256) throw InvalidInput("snapshot: section name too long");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw InvalidInput("snapshot: truncated section name");
    out.emplace_back(std::move(name), read_field(is));
  }
  return out;
}

}  // namespace higgsflow
