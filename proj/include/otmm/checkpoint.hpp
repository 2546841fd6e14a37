#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "otmm/errors.hpp"
#include "otmm/nets.hpp"

namespace otmm {

// "OTMM1" checkpoint format: versioned text with the architecture header
// followed by the flat parameter lists in declaration order, printed with 17
// significant digits (lossless for IEEE doubles).

namespace detail {

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_params(std::ostream& os, const ParamStore& ps) {
  os << "params " << ps.count() << "\n";
  for (int i = 0; i < ps.count(); ++i) {
    const Array& v = ps.value(i);
    os << "param " << ps.name(i) << " " << v.rows() << " " << v.cols()
       << (ps.nonneg(i) ? " nonneg" : "") << "\n";
    for (size_t k = 0; k < v.size(); ++k) os << fmt17(v[k]) << (k + 1 == v.size() ? "" : " ");
    if (v.size() > 0) os << "\n";
  }
}

class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}
  std::istringstream expect(const std::string& keyword) {
    std::string line;
    if (!std::getline(is_, line))
      throw ConfigError("checkpoint: unexpected end of file, wanted '" + keyword + "'");
    std::istringstream ss(line);
    std::string head;
    ss >> head;
    if (head != keyword)
      throw ConfigError("checkpoint: expected '" + keyword + "', got '" + head + "'");
    return ss;
  }
  std::istream& stream() { return is_; }

 private:
  std::istream& is_;
};

inline void read_params(LineReader& r, ParamStore& ps) {
  int count = 0;
  r.expect("params") >> count;
  for (int i = 0; i < count; ++i) {
    std::string name, flag;
    int rows = 0, cols = 0;
    auto ss = r.expect("param");
    ss >> name >> rows >> cols >> flag;
    Array& v = ps.count() > i && ps.name(i) == name ? ps.value(i)
                                                    : ps.add(name, rows, cols, flag == "nonneg");
    if (v.rows() != rows || v.cols() != cols)
      throw ConfigError("checkpoint: shape mismatch for parameter " + name);
    for (size_t k = 0; k < v.size(); ++k)
      if (!(r.stream() >> v[k])) throw ConfigError("checkpoint: truncated values for " + name);
    r.stream().ignore(1, '\n');
  }
}

inline std::vector<int> parse_widths(std::istringstream ss) {
  std::vector<int> w;
  int x;
  while (ss >> x) w.push_back(x);
  return w;
}

}  // namespace detail

inline void save_checkpoint(std::ostream& os, const MapNet& net) {
  os << "OTMM1\n";
  os << "family map\n";
  os << "dim " << net.dim() << "\n";
  os << "widths";
  for (int h : net.hidden()) os << " " << h;
  os << "\n";
  os << "activation relu\n";
  os << "beta 0\n";
  os << "skip linear\n";
  detail::write_params(os, net.params());
}

inline void save_checkpoint(std::ostream& os, const StrongPotential& pot) {
  os << "OTMM1\n";
  os << "family potential\n";
  os << "dim " << pot.dim() << "\n";
  os << "widths";
  for (int h : pot.icnn().hidden()) os << " " << h;
  os << "\n";
  os << "activation " << to_string(pot.icnn().activation());
  if (pot.icnn().activation() == Activation::Celu) os << " " << detail::fmt17(pot.icnn().celu_n());
  os << "\n";
  os << "beta " << detail::fmt17(pot.beta()) << "\n";
  os << "skip " << to_string(pot.icnn().skip()) << "\n";
  detail::write_params(os, pot.icnn().params());
}

template <typename Net>
void save_checkpoint_file(const std::string& path, const Net& net) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open checkpoint file for writing: " + path);
  save_checkpoint(os, net);
}

template <typename Net>
std::string checkpoint_string(const Net& net) {
  std::ostringstream os;
  save_checkpoint(os, net);
  return os.str();
}

struct CheckpointHeader {
  std::string family;
  int dim = 0;
  std::vector<int> widths;
  Activation act = Activation::Relu;
  double celu_n = 1.0;
  double beta = 0.0;
  SkipKind skip = SkipKind::Linear;
};

inline CheckpointHeader read_checkpoint_header(detail::LineReader& r) {
  r.expect("OTMM1");
  CheckpointHeader h;
  r.expect("family") >> h.family;
  r.expect("dim") >> h.dim;
  h.widths = detail::parse_widths(r.expect("widths"));
  std::string act;
  auto ss = r.expect("activation");
  ss >> act;
  if (act == "celu") {
    h.act = Activation::Celu;
    if (!(ss >> h.celu_n)) h.celu_n = 1.0;
  } else if (act == "relu") {
    h.act = Activation::Relu;
  } else {
    throw ConfigError("checkpoint: unknown activation " + act);
  }
  r.expect("beta") >> h.beta;
  std::string skip;
  r.expect("skip") >> skip;
  if (skip == "quadratic")
    h.skip = SkipKind::Quadratic;
  else if (skip != "linear")
    throw ConfigError("checkpoint: unknown skip kind " + skip);
  return h;
}

inline MapNet load_map_checkpoint(std::istream& is) {
  detail::LineReader r(is);
  const CheckpointHeader h = read_checkpoint_header(r);
  if (h.family != "map") throw ConfigError("checkpoint: family is not 'map'");
  MapNet net = MapNet::init(h.dim, h.widths, 0);
  detail::read_params(r, net.params());
  return net;
}

inline StrongPotential load_potential_checkpoint(std::istream& is) {
  detail::LineReader r(is);
  const CheckpointHeader h = read_checkpoint_header(r);
  if (h.family != "potential") throw ConfigError("checkpoint: family is not 'potential'");
  StrongPotential pot =
      StrongPotential::init(h.dim, h.widths, h.act, h.celu_n, h.skip, h.beta, 0);
  detail::read_params(r, pot.icnn().params());
  return pot;
}

inline MapNet load_map_checkpoint_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open checkpoint file: " + path);
  return load_map_checkpoint(is);
}

inline StrongPotential load_potential_checkpoint_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open checkpoint file: " + path);
  return load_potential_checkpoint(is);
}

}  // namespace otmm
