#pragma once

#include <ostream>

namespace dgs {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

/// The command-line tool. Subcommands:
///
///   gen-scene                        synthetic scene (and ground_truth.ply) into --out-dir
///   train-teacher SCENE --variant V  teacher_V.ply, teacher_V_history.csv
///   distill SCENE --teachers A B C   student.ply, student_history.csv
///   render SCENE --checkpoint C --camera-index I   render_III.png
///   eval SCENE --checkpoint C --split S            metrics_S.csv
///   hist-compare A B [--grid G]      prints the histogram loss
///   ablate [SCENE]                   ablation.json
///
/// Global flags: --config FILE, --seed N, --out-dir DIR, --iters N (rescales every
/// schedule with with_total_iters), --threads N. Returns kExitOk, kExitUsage (bad
/// arguments, usage printed to `err`) or kExitRuntime (failure while running).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace dgs
