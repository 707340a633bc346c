#include "polyformer/serialization.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace polyformer {

using nlohmann::json;

json polynomial_to_json(const Polynomial& p) {
  json terms = json::array();
  for (const auto& [mi, coef] : p.terms()) terms.push_back({{"exp", mi.exponents()}, {"coef", coef}});
  return {{"dim", p.dim()}, {"degree", p.degree()}, {"terms", terms}};
}

Polynomial polynomial_from_json(const json& j) {
  Polynomial p(j.at("dim").get<int>(), j.at("degree").get<int>());
  for (const auto& term : j.at("terms"))
    p.add_term(MultiIndex(term.at("exp").get<std::vector<int>>()), term.at("coef").get<double>());
  return p;
}

json basis_to_json(const RidgeBasis& b) {
  return {{"dim", b.dim}, {"degree", b.degree}, {"seed", b.seed}, {"xi", b.xi}};
}

RidgeBasis basis_from_json(const json& j) {
  RidgeBasis b = make_basis(j.at("dim").get<int>(), j.at("degree").get<int>(),
                            j.at("xi").get<std::vector<std::vector<double>>>());
  b.seed = j.at("seed").get<std::uint64_t>();
  return b;
}

json model_to_json(const TransformerModel& m) {
  json blocks = json::array();
  for (const auto& b : m.blocks) blocks.push_back({{"s", b.stage}, {"C", b.sep_const}});
  json beta = json::array();
  for (const auto& e : m.readout.entries) beta.push_back({e.token, e.slot, e.weight});
  return {{"d", m.d},
          {"q", m.q},
          {"n", m.n},
          {"F", m.embed.data()},
          {"blocks", blocks},
          {"beta", beta},
          {"bias", m.bias},
          {"input_bound", m.input_bound}};
}

TransformerModel model_from_json(const json& j) {
  TransformerModel m;
  m.d = j.at("d").get<int>();
  m.q = j.at("q").get<int>();
  m.n = j.at("n").get<int>();
  m.bias = j.at("bias").get<double>();
  m.input_bound = j.at("input_bound").get<double>();
  auto f = j.at("F").get<std::vector<double>>();
  if (static_cast<int>(f.size()) != m.n * m.d) throw std::invalid_argument("model_from_json: bad F size");
  m.embed = Matrix(m.n, m.d);
  m.embed.data() = std::move(f);
  for (const auto& b : j.at("blocks"))
    m.blocks.push_back(build_block(m.n, m.q, b.at("s").get<int>(), b.at("C").get<double>()));
  for (const auto& e : j.at("beta"))
    m.readout.entries.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>()});
  m.readout.sort_entries();
  return m;
}

void write_history_csv(const RunHistory& history, std::ostream& os) {
  os << "epoch,train_mse,test_mse,lr,seconds\n";
  os << std::setprecision(17);
  for (const auto& e : history.epochs)
    os << e.epoch << ',' << e.train_mse_noisy << ',' << e.test_mse_clean << ',' << e.lr << ','
       << e.seconds << '\n';
}

void write_trace_jsonl(const ForwardTrace& trace, std::ostream& os) {
  for (std::size_t b = 0; b < trace.selections.size(); ++b) {
    const TokenMatrix& z = trace.states[b + 1];
    json powers = json::array();
    for (int i = 0; i < z.n; ++i) {
      json row = json::array();
      for (int s = 1; s <= z.q; ++s) row.push_back(z.at(z.n + s, i));
      powers.push_back(row);
    }
    json line = {{"block", b + 1}, {"selections", trace.selections[b]}, {"power_slots", powers}};
    os << line.dump() << '\n';
  }
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  return j;
}

void save_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace polyformer
