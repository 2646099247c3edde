#include "cavgame/coalition_engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cavgame/errors.hpp"

namespace cavgame {

std::vector<SubCoalition> form_sub_coalitions(std::vector<Player> players, double gap_threshold) {
    std::stable_sort(players.begin(), players.end(), [](const Player& a, const Player& b) {
        if (a.lane != b.lane) return a.lane > b.lane;
        return a.X > b.X;
    });
    std::vector<SubCoalition> out;
    for (size_t i = 0; i < players.size(); ++i) {
        const Player& p = players[i];
        const bool chain = i > 0 && !out.empty() && players[i - 1].lane == p.lane &&
                           players[i - 1].X - p.X < gap_threshold && players[i - 1].profile.same_weights(p.profile);
        if (chain) {
            out.back().members.push_back(p.id);
        } else {
            out.push_back({{p.id}, p.lane});
        }
    }
    return out;
}

CharacteristicMap::CharacteristicMap(int n) : n_(n) {
    if (n < 1 || n > 16) throw std::invalid_argument("characteristic map supports 1..16 players");
    values_.resize(size_t{1} << n);
    values_[0] = 0.0;
}

void CharacteristicMap::set(SubsetMask s, double value) {
    if (s == 0 || s > grand()) throw std::out_of_range("subset outside the player set");
    values_[s] = value;
}

bool CharacteristicMap::has(SubsetMask s) const { return s <= grand() && values_[s].has_value(); }

double CharacteristicMap::at(SubsetMask s) const {
    if (!has(s)) throw MissingSubset("no value for subset " + std::to_string(s));
    return *values_[s];
}

bool CharacteristicMap::complete() const {
    return std::all_of(values_.begin(), values_.end(), [](const auto& v) { return v.has_value(); });
}

std::vector<double> shapley_allocation(const CharacteristicMap& cmap) {
    const int n = cmap.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> q(n, 0.0);
    long count = 0;
    do {
        SubsetMask s = 0;
        double prev = 0.0;
        for (int i : order) {
            s |= SubsetMask{1} << i;
            const double v = cmap.at(s);
            q[i] += v - prev;
            prev = v;
        }
        ++count;
    } while (std::next_permutation(order.begin(), order.end()));
    for (double& x : q) x /= static_cast<double>(count);
    return q;
}

Rationality rationality_check(double Q, double J, double tolerance) {
    return Q > J + tolerance ? Rationality::BreakAway : Rationality::Stay;
}

namespace {

std::vector<SubsetMask> singletons(int n) {
    std::vector<SubsetMask> out;
    for (int i = 0; i < n; ++i) out.push_back(SubsetMask{1} << i);
    return out;
}

}  // namespace

FormationOutcome coalition_formation(int n, const std::function<double(SubsetMask)>& evaluator,
                                     const FormationOptions& options) {
    CharacteristicMap cmap(n);
    for (SubsetMask s = 1; s <= cmap.grand(); ++s) {
        try {
            cmap.set(s, evaluator(s));
        } catch (const EvaluatorFailure&) {
            throw;
        } catch (const std::exception& e) {
            throw EvaluatorFailure(s, e.what());
        }
    }

    FormationOutcome out{{}, shapley_allocation(cmap), std::vector<bool>(n, false), cmap};
    std::vector<int> defectors;
    for (int i = 0; i < n; ++i) {
        if (rationality_check(out.allocations[i], cmap.at(SubsetMask{1} << i), options.tolerance) ==
            Rationality::BreakAway) {
            out.defected[i] = true;
            defectors.push_back(i);
        }
    }

    if (defectors.empty()) {
        out.coalitions = {cmap.grand()};
    } else if (defectors.size() == 1) {
        const SubsetMask d = SubsetMask{1} << defectors.front();
        out.coalitions = {d, cmap.grand() & ~d};
    } else {
        out.coalitions = singletons(n);
    }

    // merged coalitions must not cost more than their parts
    std::vector<SubsetMask> checked;
    for (SubsetMask c : out.coalitions) {
        if (c == 0) continue;
        const int parts = std::popcount(c);
        if (parts < 2) {
            checked.push_back(c);
            continue;
        }
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            if (c & (SubsetMask{1} << i)) sum += cmap.at(SubsetMask{1} << i);
        }
        if (cmap.at(c) <= sum + options.tolerance * parts) {
            checked.push_back(c);
        } else {
            for (int i = 0; i < n; ++i) {
                if (c & (SubsetMask{1} << i)) checked.push_back(SubsetMask{1} << i);
            }
        }
    }
    std::sort(checked.begin(), checked.end(), [](SubsetMask a, SubsetMask b) {
        return std::countr_zero(a) < std::countr_zero(b);
    });
    out.coalitions = checked;
    return out;
}

std::string_view coalition_type_name(CoalitionType t) {
    switch (t) {
        case CoalitionType::SinglePlayer: return "single-player";
        case CoalitionType::MultiPlayer: return "multi-player";
        case CoalitionType::Grand: return "grand";
        case CoalitionType::GrandWithSub: return "grand-with-sub";
    }
    return "unknown";
}

std::string CoalitionPartition::to_string() const {
    std::string s;
    for (size_t c = 0; c < coalitions.size(); ++c) {
        if (c) s += ' ';
        s += '{';
        for (size_t k = 0; k < coalitions[c].size(); ++k) {
            if (k) s += ',';
            s += '{';
            const auto& m = coalitions[c][k].members;
            for (size_t j = 0; j < m.size(); ++j) {
                if (j) s += ',';
                s += m[j];
            }
            s += '}';
        }
        s += '}';
    }
    return s;
}

CoalitionPartition make_partition(const std::vector<SubCoalition>& subs, const std::vector<SubsetMask>& coalitions) {
    CoalitionPartition p;
    SubsetMask covered = 0;
    for (SubsetMask c : coalitions) {
        if (c & covered) throw std::invalid_argument("coalitions overlap");
        covered |= c;
        std::vector<SubCoalition> group;
        for (size_t i = 0; i < subs.size(); ++i) {
            if (c & (SubsetMask{1} << i)) group.push_back(subs[i]);
        }
        p.coalitions.push_back(std::move(group));
    }
    if (covered != (SubsetMask{1} << subs.size()) - 1) throw std::invalid_argument("coalitions do not cover all players");

    auto vehicles = [](const std::vector<SubCoalition>& g) {
        size_t n = 0;
        for (const auto& s : g) n += s.members.size();
        return n;
    };
    bool any_multi_sub = false;
    for (const auto& s : subs) any_multi_sub |= s.members.size() > 1;

    if (p.coalitions.size() == 1 && vehicles(p.coalitions.front()) > 1) {
        p.type = any_multi_sub ? CoalitionType::GrandWithSub : CoalitionType::Grand;
    } else {
        bool multi = false;
        for (const auto& g : p.coalitions) multi |= vehicles(g) > 1;
        p.type = multi ? CoalitionType::MultiPlayer : CoalitionType::SinglePlayer;
    }
    return p;
}

int delay_steps(double gap, double v_follower, double dt) {
    if (!(v_follower > 0) || !(dt > 0)) throw std::invalid_argument("delay needs positive speed and dt");
    return std::max(0, static_cast<int>(std::lround(gap / (v_follower * dt))));
}

std::vector<DecisionAction> replay_with_delay(std::span<const DecisionAction> leader_decisions, double gap,
                                              double v_follower, double dt) {
    const size_t tau = static_cast<size_t>(delay_steps(gap, v_follower, dt));
    std::vector<DecisionAction> out(leader_decisions.size(), kHoldAction);
    for (size_t k = tau; k < leader_decisions.size(); ++k) out[k] = leader_decisions[k - tau];
    return out;
}

}  // namespace cavgame
