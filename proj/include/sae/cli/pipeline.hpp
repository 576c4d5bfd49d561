#pragma once

// The four batch commands. Each reads the run configuration and writes files under config.out:
//   simulate  data/       areas, schema, sample, margins, crosstab, adjacency, geometry, gold
//   estimate  estimates/  one CSV per estimator (+ t sidecars), draws/, diagnostics/, manifest.json
//   assess    assessment.csv/json and maps/*.svg
//   report    report.md

#include <Eigen/Core>

#include <optional>
#include <vector>

#include "sae/cli/config.hpp"
#include "sae/frame.hpp"
#include "sae/geojson.hpp"
#include "sae/graph.hpp"
#include "sae/synth.hpp"

namespace sae::cli {

struct SimulatedData {
  AreaIndex areas;
  std::vector<AreaShape> shapes;
  AreaGraph graph;
  SyntheticTruth truth;
  Schema schema;
  SurveySample sample;
};

/// Everything `simulate` writes, without touching the file system.
SimulatedData simulate_data(const RunConfig& config);

struct Inputs {
  AreaIndex areas;
  Schema schema;
  SurveySample sample;
  std::optional<PopulationMargins> margins;  // absent when the margins file does not exist
  AreaGraph graph;
  std::vector<AreaShape> shapes;  // in area order; tiles when no geometry was supplied
  std::optional<Eigen::VectorXd> gold;
};

Inputs load_inputs(const RunConfig& config);

void cmd_simulate(const RunConfig& config);
void cmd_estimate(const RunConfig& config);
void cmd_assess(const RunConfig& config);
void cmd_report(const RunConfig& config);

}  // namespace sae::cli
