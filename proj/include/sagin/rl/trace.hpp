#pragma once

#include <deque>
#include <string>
#include <vector>

#include "sagin/csv.hpp"
#include "sagin/error.hpp"

namespace sagin::rl {

struct TraceRow {
    std::size_t step = 0;
    double effect = 0.0;
    double moving_avg = 0.0; // mean of the last min(window, step + 1) effects
};

class ConvergenceTrace {
public:
    explicit ConvergenceTrace(std::size_t window = 100) : window_(window) {
        if (window == 0) throw InvalidArgument("moving-average window must be > 0");
    }

    void push(double effect) {
        recent_.push_back(effect);
        if (recent_.size() > window_) recent_.pop_front();
        // Summed afresh each step so the average never accumulates drift.
        double sum = 0.0;
        for (double v : recent_) sum += v;
        rows_.push_back({rows_.size(), effect, sum / static_cast<double>(recent_.size())});
    }

    std::size_t window() const { return window_; }
    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }
    const std::vector<TraceRow>& rows() const { return rows_; }
    const TraceRow& back() const { return rows_.back(); }

    std::string to_csv() const {
        std::string out = "step,effect,moving_avg\n";
        for (const auto& r : rows_)
            out += std::to_string(r.step) + "," + csv::format(r.effect) + "," + csv::format(r.moving_avg) + "\n";
        return out;
    }

private:
    std::size_t window_;
    std::deque<double> recent_;
    std::vector<TraceRow> rows_;
};

} // namespace sagin::rl
