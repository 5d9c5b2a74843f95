#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "rho_bayes/error.hpp"
#include "rho_bayes/model.hpp"

// Format:
//   family=<name> k=<params per member> members=<N> weights=<0|1>
//   @<key>=<value>          family context (partition, shape, degree, box, dim)
//   p1,p2,...,pk[<TAB>w]    one line per member

namespace rho_bayes {

namespace {

std::string full(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string join(std::span<const double> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += full(v[i]);
  }
  return s;
}

std::vector<double> split_numbers(const std::string& text, const std::string& context) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw DomainError("read_net: bad number '" + item + "' in " + context);
    }
  }
  return out;
}

std::map<std::string, std::string> parse_pairs(const std::string& line) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(line);
  std::string tok;
  while (ss >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw DomainError("read_net: expected key=value, got '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

std::size_t parse_count(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw DomainError("read_net: header lacks '" + key + "'");
  try {
    return static_cast<std::size_t>(std::stoull(it->second));
  } catch (const std::exception&) {
    throw DomainError("read_net: bad value for '" + key + "'");
  }
}

}  // namespace

void write_net(std::ostream& out, const Net& net, const WeightVector* weights) {
  if (net.empty()) throw DomainError("write_net: empty net");
  if (weights) weights->validate(net.size());
  const FamilySpec& s = *net.spec_ptr();
  out << "family=" << family_name(s.family) << " k=" << s.param_count() << " members=" << net.size()
      << " weights=" << (weights ? 1 : 0) << '\n';
  switch (s.family) {
    case Family::uniform_scale: break;
    case Family::uniform_cube: out << "@dim=" << s.cube_dim << '\n'; break;
    case Family::gamma_translation: out << "@alpha=" << full(s.gamma_alpha) << '\n'; break;
    case Family::histogram: out << "@breakpoints=" << join(s.breakpoints) << '\n'; break;
    case Family::exp_family: out << "@degree=" << s.exp.degree << "\n@box=" << full(s.exp.box) << '\n'; break;
  }
  for (std::size_t i = 0; i < net.size(); ++i) {
    out << join(net[i].params());
    if (weights) out << '\t' << full((*weights)[i]);
    out << '\n';
  }
}

NetFile read_net(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DomainError("read_net: empty input");
  const auto header = parse_pairs(line);
  auto fam_it = header.find("family");
  if (fam_it == header.end()) throw DomainError("read_net: header lacks 'family'");
  const Family family = parse_family(fam_it->second);
  const std::size_t k = parse_count(header, "k");
  const std::size_t count = parse_count(header, "members");
  const bool has_weights = parse_count(header, "weights") != 0;

  std::map<std::string, std::string> context;
  std::vector<std::string> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '@') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw DomainError("read_net: bad context line '" + line + "'");
      context[line.substr(1, eq - 1)] = line.substr(eq + 1);
    } else {
      rows.push_back(line);
    }
  }
  auto need = [&context](const char* key) -> const std::string& {
    auto it = context.find(key);
    if (it == context.end()) throw DomainError(std::string("read_net: missing @") + key);
    return it->second;
  };

  FamilyPtr spec;
  switch (family) {
    case Family::uniform_scale: spec = FamilySpec::uniform_scale(); break;
    case Family::uniform_cube: spec = FamilySpec::uniform_cube(std::stoull(need("dim"))); break;
    case Family::gamma_translation: spec = FamilySpec::gamma_translation(std::stod(need("alpha"))); break;
    case Family::histogram: spec = FamilySpec::histogram(split_numbers(need("breakpoints"), "@breakpoints")); break;
    case Family::exp_family:
      spec = FamilySpec::exp_family(std::stoull(need("degree")), std::stod(need("box")));
      break;
  }
  if (spec->param_count() != k) throw DomainError("read_net: k disagrees with the family context");
  if (rows.size() != count) {
    throw DomainError("read_net: header announces " + std::to_string(count) + " members, found " +
                      std::to_string(rows.size()));
  }

  std::vector<DensityMember> members;
  std::vector<double> weights;
  members.reserve(count);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::string params = rows[i];
    const auto tab = params.find('\t');
    if (has_weights) {
      if (tab == std::string::npos) throw DomainError("read_net: member line " + std::to_string(i) + " lacks a weight");
      weights.push_back(split_numbers(params.substr(tab + 1), "weight column").at(0));
      params.resize(tab);
    } else if (tab != std::string::npos) {
      throw DomainError("read_net: unexpected weight column");
    }
    auto theta = split_numbers(params, "member line " + std::to_string(i));
    if (theta.size() != k) throw DomainError("read_net: member line " + std::to_string(i) + " has wrong arity");
    members.emplace_back(spec, std::move(theta));
  }
  NetFile file{Net(std::move(members)), std::nullopt};
  if (has_weights) {
    WeightVector w{std::move(weights)};
    w.validate(count);
    file.weights = std::move(w);
  }
  return file;
}

}  // namespace rho_bayes
