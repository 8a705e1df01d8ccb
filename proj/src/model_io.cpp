#include "specmult/model_io.hpp"

#include <fstream>

namespace specmult {

namespace {

ojson complex_pair(const Complex& c) { return ojson::array({c.real(), c.imag()}); }

ojson matrix_rows(const CMatrix& m) {
  ojson rows = ojson::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ojson row = ojson::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(complex_pair(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::invalid_argument("model json: " + path + ": " + what);
}

void check_fields(const ojson& j, const std::string& path,
                  std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) fail(path + "." + key, "unknown field");
  }
}

Complex parse_complex(const ojson& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    fail(path, "expected an [re, im] pair");
  return Complex(j[0].get<double>(), j[1].get<double>());
}

CMatrix parse_matrix(const ojson& j, const std::string& path, Eigen::Index rows,
                     Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    fail(path, "expected " + std::to_string(rows) + " rows");
  CMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const ojson& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      fail(path + "[" + std::to_string(i) + "]",
           "expected " + std::to_string(cols) + " entries");
    for (Eigen::Index k = 0; k < cols; ++k)
      m(i, k) = parse_complex(row[static_cast<std::size_t>(k)],
                              path + "[" + std::to_string(i) + "][" + std::to_string(k) + "]");
  }
  return m;
}

}  // namespace

ojson model_to_json(const ModelInstance& model) {
  ojson j;
  j["sites"] = model.sites.labels;
  j["a"] = matrix_rows(model.a.entries);
  ojson blocks = ojson::array();
  for (const auto& blk : model.blocks) {
    ojson b;
    b["index"] = blk.index;
    b["support"] = blk.support;
    b["c"] = matrix_rows(blk.c);
    blocks.push_back(std::move(b));
  }
  j["blocks"] = std::move(blocks);
  j["disorder"] = {{"family", model.disorder.family},
                   {"params", model.disorder.params},
                   {"seed", model.disorder.seed}};
  if (model.has_omega()) {
    std::vector<double> om(model.omega.data(), model.omega.data() + model.omega.size());
    j["omega"] = om;
  }
  return j;
}

ModelInstance model_from_json(const ojson& j) {
  check_fields(j, "model", {"sites", "a", "blocks", "disorder", "omega"});
  for (const char* field : {"sites", "a", "blocks", "disorder"})
    if (!j.contains(field)) fail(field, "missing");

  ModelInstance m;
  if (!j["sites"].is_array() || j["sites"].empty()) fail("sites", "expected a nonempty array");
  for (const auto& s : j["sites"]) {
    if (!s.is_string()) fail("sites", "expected strings");
    m.sites.labels.push_back(s.get<std::string>());
  }
  const Eigen::Index dim = m.sites.dim();

  CMatrix a = parse_matrix(j["a"], "a", dim, dim);
  if (!is_exactly_hermitian(a)) fail("a", "not exactly Hermitian");
  m.a = HermitianOperator(std::move(a));

  if (!j["blocks"].is_array() || j["blocks"].empty())
    fail("blocks", "expected a nonempty array");
  int expected_index = 0;
  for (const auto& b : j["blocks"]) {
    const std::string path = "blocks[" + std::to_string(expected_index) + "]";
    check_fields(b, path, {"index", "support", "c"});
    for (const char* field : {"index", "support", "c"})
      if (!b.contains(field)) fail(path + "." + field, "missing");
    if (!b["index"].is_number_integer() || b["index"].get<int>() != expected_index)
      fail(path + ".index", "blocks must be listed in ascending index order");
    std::vector<int> support;
    for (const auto& s : b["support"]) {
      if (!s.is_number_integer()) fail(path + ".support", "expected integers");
      const int site = s.get<int>();
      if (site < 0 || site >= dim) fail(path + ".support", "site out of range");
      if (!support.empty() && site <= support.back())
        fail(path + ".support", "sites must be strictly ascending");
      support.push_back(site);
    }
    if (support.empty()) fail(path + ".support", "empty support");
    const Eigen::Index r = static_cast<Eigen::Index>(support.size());
    CMatrix c = parse_matrix(b["c"], path + ".c", r, r);
    if (!is_exactly_hermitian(c)) fail(path + ".c", "not exactly Hermitian");
    m.blocks.push_back(make_block(expected_index, std::move(support), std::move(c)));
    ++expected_index;
  }

  const ojson& dis = j["disorder"];
  check_fields(dis, "disorder", {"family", "params", "seed"});
  for (const char* field : {"family", "params", "seed"})
    if (!dis.contains(field)) fail(std::string("disorder.") + field, "missing");
  m.disorder.family = dis["family"].get<std::string>();
  if (m.disorder.family != "uniform" && m.disorder.family != "gaussian")
    fail("disorder.family", "expected uniform or gaussian");
  m.disorder.params = dis["params"].get<std::vector<double>>();
  if (m.disorder.params.size() != 2) fail("disorder.params", "expected two parameters");
  m.disorder.seed = dis["seed"].get<std::uint64_t>();

  if (j.contains("omega")) {
    const auto om = j["omega"].get<std::vector<double>>();
    if (om.size() != m.blocks.size()) fail("omega", "length must match the block count");
    RVector omega(static_cast<Eigen::Index>(om.size()));
    for (std::size_t i = 0; i < om.size(); ++i) omega(static_cast<Eigen::Index>(i)) = om[i];
    return with_omega(std::move(m), std::move(omega));
  }
  return m;
}

void save_model(const ModelInstance& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_model: cannot open " + path);
  out << model_to_json(model).dump(2) << "\n";
}

ModelInstance load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_model: cannot open " + path);
  ojson j;
  try {
    j = ojson::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("model json: " + path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace specmult
