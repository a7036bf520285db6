#pragma once

#include <string>
#include <vector>

#include "mobiface/graph.hpp"

namespace mobiface {

// Static cost model over an architecture spec. All figures are per single
// image (no batch dimension) and independent of weight values.
//
// Counting conventions, also printed in report headers:
//   - MACs (multiply-accumulates), 1 MAC = 2 FLOPs.
//   - conv MACs = H'*W'*k^2*Cin*Cout, depthwise = H'*W'*k^2*C, FC = in*out;
//     batch norm / PReLU / ReLU count one multiply-add per output element.
//   - Batch norm running statistics are "buffer" parameters: not learnable
//     but serialized, so they occupy file bytes.
//   - Shortcut additions are not multiply-adds and count zero MACs.

struct ParamRow {
    std::string layer;
    long long learnable = 0;
    long long buffers = 0;
};

struct MacRow {
    std::string layer;
    long long macs = 0;
};

struct ActRow {
    std::string layer;
    long long bytes = 0;  // output activation, 4 bytes per element
};

struct DownsampleEvent {
    std::string layer;
    int in_h = 0, in_w = 0;
    int out_h = 0, out_w = 0;
};

struct DownsamplingReport {
    std::vector<DownsampleEvent> events;
    int target_spatial = 0;  // terminal feature-map extent the schedule aims for
    // Every reduction exactly halves the extent and the reductions chain
    // from the input extent down to the target.
    bool halves_to_target = false;
    // No reduction fires once the extent is at or below the target.
    bool none_at_or_below_target = false;
    // From the first target-sized map onward, every spatial layer runs at
    // exactly target x target.
    bool tail_at_target = false;
};

struct ReportRow {
    std::string layer;
    std::vector<int> out_shape;
    long long params = 0;
    long long buffers = 0;
    long long macs = 0;
    long long act_bytes = 0;
};

struct ArchReport {
    std::string arch_id;
    std::vector<ReportRow> rows;
    long long total_params = 0;
    long long total_buffers = 0;
    long long total_macs = 0;
    long long peak_act_bytes = 0;  // max over layers of input + output bytes
    std::string peak_layer;
    DownsamplingReport downsampling;
};

std::vector<ParamRow> count_params(const NetworkSpec& net);
std::vector<MacRow> count_macs(const NetworkSpec& net);
std::vector<ActRow> activation_memory(const NetworkSpec& net);

long long total_learnable(const std::vector<ParamRow>& rows);
long long total_buffers(const std::vector<ParamRow>& rows);
long long total_macs(const std::vector<MacRow>& rows);

// Peak working set under sequential execution: max over layers of
// (input bytes + output bytes). Returns the peak and names the layer.
std::pair<long long, std::string> peak_activation(const NetworkSpec& net);

DownsamplingReport downsampling_report(const NetworkSpec& net, int target_spatial = 7);

// Full ledger for an architecture, flip head included when present.
ArchReport analyze(const Arch& arch);

}  // namespace mobiface
