#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace cacherl {

/// Exploration probability as a function of the 1-based iteration index.
struct EpsilonSchedule {
    enum class Kind {
        Constant,       // value
        BurnInInverse,  // 1 for t <= burn_in, then 1/t
        Linear,         // start -> end linearly over anneal_steps, then end
    };

    Kind kind = Kind::Constant;
    double value = 0.05;
    std::uint64_t burn_in = 0;
    double start = 1.0;
    double end = 0.05;
    std::uint64_t anneal_steps = 0;

    static EpsilonSchedule constant(double eps) { return {Kind::Constant, eps, 0, eps, eps, 0}; }
    static EpsilonSchedule burn_in_inverse(std::uint64_t burn) { return {Kind::BurnInInverse, 0.0, burn, 1.0, 0.0, 0}; }
    static EpsilonSchedule linear(double from, double to, std::uint64_t steps) {
        return {Kind::Linear, to, 0, from, to, steps};
    }

    double at(std::uint64_t t) const {
        switch (kind) {
            case Kind::Constant: return value;
            case Kind::BurnInInverse: return t <= burn_in ? 1.0 : 1.0 / static_cast<double>(t);
            case Kind::Linear: {
                if (anneal_steps == 0 || t >= anneal_steps) return end;
                const double frac = static_cast<double>(t) / static_cast<double>(anneal_steps);
                return start + (end - start) * frac;
            }
        }
        return value;
    }

    void validate() const {
        auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
        if (!in01(value) || !in01(start) || !in01(end)) throw std::invalid_argument("epsilon must lie in [0, 1]");
    }
};

/// Step size for the tabular update.
struct StepSchedule {
    enum class Kind {
        Constant,      // beta
        InverseVisit,  // 1 / (number of updates of this entry so far, including this one)
        Polynomial,    // beta · visits^-omega
    };

    Kind kind = Kind::Constant;
    double beta = 0.8;
    double omega = 0.0;

    static StepSchedule constant(double b) { return {Kind::Constant, b, 0.0}; }
    static StepSchedule inverse_visit() { return {Kind::InverseVisit, 1.0, 1.0}; }
    static StepSchedule polynomial(double b, double w) { return {Kind::Polynomial, b, w}; }

    double at(std::uint64_t visits) const {
        const double n = static_cast<double>(std::max<std::uint64_t>(visits, 1));
        switch (kind) {
            case Kind::Constant: return beta;
            case Kind::InverseVisit: return 1.0 / n;
            case Kind::Polynomial: return beta * std::pow(n, -omega);
        }
        return beta;
    }

    void validate() const {
        if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in (0, 1]");
        if (kind == Kind::Polynomial && !(omega > 0.5 && omega <= 1.0))
            throw std::invalid_argument("omega must lie in (0.5, 1]");
    }
};

}  // namespace cacherl
