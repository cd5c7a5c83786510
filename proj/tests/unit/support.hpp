#pragma once

#include "feetiming/model.hpp"

namespace fixtures {

inline feetiming::Scenario ethereum_like(bool linear, double valuation) {
    feetiming::Scenario s;
    s.interval = feetiming::BlockIntervalModel::fixed(10.0);
    s.arrivals = linear ? feetiming::ArrivalProcess::linear(40.0) : feetiming::ArrivalProcess::poisson(40.0);
    s.fees = feetiming::FeeDistribution::pareto(1.0, 5.9512);
    s.capacity = 200;
    s.valuation = valuation;
    s.tick = 1e-8;
    return s;
}

inline feetiming::Scenario bitcoin_like(bool linear, double valuation) {
    feetiming::Scenario s = ethereum_like(linear, valuation);
    s.interval = feetiming::BlockIntervalModel::exponential(0.1);
    return s;
}

inline feetiming::Scenario small_pow(double lambda, double beta, int m, double valuation) {
    feetiming::Scenario s;
    s.interval = feetiming::BlockIntervalModel::exponential(lambda);
    s.arrivals = feetiming::ArrivalProcess::poisson(beta);
    s.fees = feetiming::FeeDistribution::uniform(0.0, 1.0);
    s.capacity = m;
    s.valuation = valuation;
    s.tick = 1e-9;
    return s;
}

}  // namespace fixtures
