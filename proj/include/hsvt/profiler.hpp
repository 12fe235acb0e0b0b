#pragma once

#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "hsvt/costing.hpp"
#include "hsvt/detect.hpp"
#include "hsvt/synthetic.hpp"

namespace hsvt {

// 45 nm energy-per-op constants: 4.6 pJ per FLOP (MAC-based ANN compute),
// 0.9 pJ per synaptic operation.
inline constexpr double kJoulesPerFlop = 4.6e-12;
inline constexpr double kJoulesPerSop = 0.9e-12;

double energy_ann_mj(double flops);
double energy_snn_mj(double sops);
double sops(double fr, double timesteps, double flops);

// Static count: runs one forward over a zero window of the given extent with
// the cost recorder active. state starts fresh.
std::vector<costing::OpCostRecord> count_flops(Detector& model, int64_t height,
                                               int64_t width);
double total_flops(const std::vector<costing::OpCostRecord>& ops);

struct FiringRateStats {
  std::map<int, double> spikes;        // per spiking layer id
  std::map<int, double> neuron_steps;  // neurons x timesteps x samples
  int64_t samples = 0;

  double fr(int layer_id) const;  // in [0, 1]; 0 for unknown layers
  double global_fr() const;       // total spikes / total neuron-steps
};

FiringRateStats measure_firing_rates(Detector& model,
                                     const std::vector<SequenceSample>& calibration);

struct ComponentEnergy {
  double flops = 0;  // non-spiking op FLOPs
  double sops = 0;   // spike-driven ops, fr x T x FLOPs (layerwise fr)
  double e_ann_mj = 0;
  double e_snn_mj = 0;
  double e_total_mj() const { return e_ann_mj + e_snn_mj; }
};

struct EnergyReport {
  ComponentEnergy backbone;  // module paths under "backbone"
  ComponentEnergy fpn_head;  // everything else (FPN + detection head)
  ComponentEnergy total;     // exact sums of the two components
  double global_fr = 0;
  double e_snn_global_fr_mj = 0;  // single-rate variant for comparison
  std::string assumptions;
};

// One calibrated forward pass per calibration window; layerwise firing rates
// applied to each spike-driven op's FLOPs.
EnergyReport energy_report(Detector& model,
                           const std::vector<SequenceSample>& calibration,
                           int64_t height, int64_t width);
EnergyReport report_from_components(const ComponentEnergy& backbone,
                                    const ComponentEnergy& fpn_head);

void write_energy_report(std::ostream& os, const EnergyReport& r);          // table
void write_energy_records(std::ostream& os, const EnergyReport& r);        // line-delimited

// Consistency audit of published per-model rows against the sops->energy
// rule; a row is flagged when the listed value deviates by more than 1e-3 mJ.
struct AuditRow {
  std::string name;
  double sops_m = 0;       // published SOPs, millions
  double listed_mj = 0;    // published E_SNN
  double computed_mj = 0;  // 0.9 pJ x SOPs
  bool flagged = false;
};

AuditRow audit_energy_row(const std::string& name, double sops_m, double listed_mj);
std::vector<AuditRow> audit_published_rows();  // built-in tiny/small/base rows

}  // namespace hsvt
