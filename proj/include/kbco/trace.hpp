#pragma once

#include "kbco/types.hpp"

#include <string>
#include <vector>

namespace kbco {

struct RoundRecord {
    long t = 0;
    Vector x;
    bool in_K = true;
    bool in_Omega = true;
    double loss = 0.0;
    double u = 0.0;
    double eta = 0.0;
    bool focus_cut = false;
    bool restart = false;
};

struct RunTrace {
    int n = 1;
    std::vector<RoundRecord> rounds;
    double cumulative_loss = 0.0;
    std::vector<long> restart_times;
    int focus_cuts = 0;
    std::vector<std::string> diagnostics;
    bool aborted = false;

    void push(RoundRecord r) {
        cumulative_loss += r.loss;
        if (r.restart) restart_times.push_back(r.t);
        if (r.focus_cut) ++focus_cuts;
        rounds.push_back(std::move(r));
    }
};

}  // namespace kbco
