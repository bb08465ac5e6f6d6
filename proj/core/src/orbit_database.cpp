#include "pinball/orbit_database.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "pinball/error.hpp"
#include "pinball/parallel.hpp"

namespace pinball {

const OrbitRecord* OrbitDatabase::find(const Word& w) const {
  auto it = std::lower_bound(records.begin(), records.end(), w,
                             [](const OrbitRecord& r, const Word& key) { return r.orbit.word < key; });
  if (it == records.end() || !(it->orbit.word == w)) return nullptr;
  return &*it;
}

OrbitDatabase sweep_orbits(const Configuration& config, int m_max, const SweepOptions& options) {
  require(m_max >= 2, "m_max must be >= 2");
  if (!config.non_eclipse_ok()) {
    fail(ErrorKind::InvalidConfiguration, "configuration violates the non-eclipse condition");
  }
  const auto words = enumerate_words(static_cast<int>(config.size()), m_max);
  auto orbits = parallel_map(words.size(), options.workers, [&](std::size_t i) {
    return locate_orbit(config, words[i], options.solver);
  });

  OrbitDatabase db;
  db.m_max = m_max;
  db.d0 = config.d0();
  db.records.reserve(orbits.size());
  std::map<Word, Monodromy> primitive_maps;
  for (auto& orbit : orbits) {
    OrbitRecord record;
    if (orbit.repetition == 1) {
      record.monodromy = poincare_map(config, orbit);
      primitive_maps.emplace(orbit.word, record.monodromy);
    } else {
      const auto decomposition = primitive_decomposition(orbit.word);
      const auto it = primitive_maps.find(decomposition.primitive);
      if (it == primitive_maps.end()) fail(ErrorKind::Consistency, "primitive of " + orbit.word.str() + " missing");
      record.monodromy = repeat(it->second, decomposition.repetition);
    }
    record.orbit = std::move(orbit);
    db.records.push_back(std::move(record));
  }
  return db;
}

double RayTerm::weight() const { return tau_primitive / std::sqrt(det_id_minus); }

std::vector<RayTerm> ray_terms(const OrbitDatabase& db, double x_max) {
  if (x_max > db.coverage()) {
    fail(ErrorKind::Coverage, "x_max " + std::to_string(x_max) + " exceeds orbit coverage " +
                                  std::to_string(db.coverage()));
  }
  std::vector<RayTerm> terms;
  for (const auto& record : db.records) {
    if (!record.primitive()) continue;
    const auto& o = record.orbit;
    for (int k = 1; k * o.tau_primitive <= x_max; ++k) {
      RayTerm t;
      t.primitive = o.word;
      t.repetition = k;
      t.tau = k * o.tau_primitive;
      t.tau_primitive = o.tau_primitive;
      t.m = k * o.m;
      t.det_id_minus = k == 1 ? record.monodromy.det_id_minus : repeat(record.monodromy, k).det_id_minus;
      terms.push_back(std::move(t));
    }
  }
  std::sort(terms.begin(), terms.end(), [](const RayTerm& a, const RayTerm& b) {
    if (a.tau != b.tau) return a.tau < b.tau;
    if (!(a.primitive == b.primitive)) return a.primitive < b.primitive;
    return a.repetition < b.repetition;
  });
  return terms;
}

std::vector<double> primitive_periods(const OrbitDatabase& db) {
  std::vector<double> out;
  for (const auto& record : db.records) {
    if (record.primitive()) out.push_back(record.orbit.tau_primitive);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<DetSample> det_samples(const OrbitDatabase& db) {
  std::vector<DetSample> out;
  out.reserve(db.records.size());
  for (const auto& record : db.records) {
    out.push_back({record.orbit.tau, record.monodromy.det_id_minus, record.orbit.m});
  }
  return out;
}

}  // namespace pinball
