#include "cavgame/simulation.hpp"

#include <algorithm>
#include <bit>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "cavgame/errors.hpp"
#include "cavgame/optimizer.hpp"

namespace cavgame {

double body_gap(const VehicleState& a, const VehicleState& b, const VehicleParams& p) {
    return std::max(std::abs(a.X - b.X) - p.length, std::abs(a.Y - b.Y) - p.width);
}

namespace {

constexpr double kViolationTol = 1e-6;

struct SimVehicle {
    VehicleSpec spec;
    VehicleState state;
    ControlInput u;
    int lane = 1;
    std::optional<int> origin;
    std::optional<double> last_ay;
    std::vector<DecisionAction> history;
    std::vector<double> plan;  // shifted increments from the last solve this vehicle led
    bool pending_commit = false;
    bool lane_change_used = false;
    double change_elapsed = 0.0;
    int change_record = -1;
};

template <class F>
void parallel_for(size_t n, int threads, F&& fn) {
    if (threads <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const size_t count = std::min<size_t>(n, static_cast<size_t>(threads));
    for (size_t t = 1; t < count; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

bool occupies(const SimVehicle& v, int lane) { return v.lane == lane || (v.origin && *v.origin == lane); }

// Index of the nearest vehicle ahead of `self` occupying `lane`, or -1.
int nearest_ahead(const std::vector<SimVehicle>& vs, size_t self, int lane) {
    int best = -1;
    double best_dx = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < vs.size(); ++i) {
        if (i == self || !occupies(vs[i], lane)) continue;
        const double dx = vs[i].state.X - vs[self].state.X;
        if (dx > 0 && dx < best_dx) {
            best_dx = dx;
            best = static_cast<int>(i);
        }
    }
    return best;
}

int nearest_in_lane(const std::vector<SimVehicle>& vs, size_t self, int lane, int exclude = -1) {
    int best = -1;
    double best_dx = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < vs.size(); ++i) {
        if (i == self || static_cast<int>(i) == exclude || !occupies(vs[i], lane)) continue;
        const double dx = std::abs(vs[i].state.X - vs[self].state.X);
        if (dx < best_dx) {
            best_dx = dx;
            best = static_cast<int>(i);
        }
    }
    return best;
}

AgentPose pose_of(const VehicleState& s) { return {s.X, s.Y, s.vx, s.phi}; }

struct SubsetSolve {
    SubsetMask mask = 0;
    CoalitionProblem problem;
    SolveResult result;
};

}  // namespace

RunResult run_closed_loop(const Scenario& s) {
    validate_scenario(s);
    const PlannerConfig& cfg = s.planner;
    const double dt = cfg.dt;
    const int nc = cfg.horizon.nc;
    const int steps = s.steps();

    std::vector<SimVehicle> vs;
    for (const auto& spec : s.vehicles) {
        SimVehicle v;
        v.spec = spec;
        v.state = {spec.vx, 0.0, 0.0, 0.0, spec.X, spec.Y};
        v.lane = spec.lane;
        vs.push_back(std::move(v));
    }

    RunResult out;
    RunSummary& sum = out.summary;
    sum.scenario = s.name;
    sum.seed = s.seed;
    sum.formation = std::string(formation_mode_name(s.formation.mode));
    sum.config = s;

    std::map<std::pair<VehicleId, VehicleId>, int> delays;

    for (int k = 0; k < steps; ++k) {
        const double t = k * dt;
        const auto t0 = std::chrono::steady_clock::now();

        std::vector<AgentSnapshot> agents;
        agents.reserve(vs.size());
        for (const auto& v : vs) {
            agents.push_back({v.spec.id, v.state, v.u, v.lane, v.origin, v.spec.profile, v.spec.player, v.last_ay,
                              v.history, v.lane_change_used, v.change_elapsed});
        }
        const WorldSnapshot world = make_snapshot(k, std::move(agents), cfg);

        std::map<VehicleId, int> index;
        std::vector<Player> players;
        for (size_t i = 0; i < vs.size(); ++i) {
            index[vs[i].spec.id] = static_cast<int>(i);
            if (!vs[i].spec.player) continue;
            const int group_lane = vs[i].origin ? *vs[i].origin : vs[i].lane;
            players.push_back({vs[i].spec.id, group_lane, vs[i].spec.profile, PlayerRole::MainLaneAdjacent,
                               vs[i].state.X});
        }
        const std::vector<SubCoalition> subs = form_sub_coalitions(players, s.formation.gap_threshold);
        const int n = static_cast<int>(subs.size());
        std::vector<int> sub_of(vs.size(), -1);
        for (int i = 0; i < n; ++i) {
            for (const auto& id : subs[i].members) sub_of[index[id]] = i;
        }

        std::map<std::pair<VehicleId, VehicleId>, int> next_delays;
        std::vector<std::vector<int>> sub_delay(n);
        for (int i = 0; i < n; ++i) {
            const auto& m = subs[i].members;
            sub_delay[i].assign(m.size(), 0);
            for (size_t j = 1; j < m.size(); ++j) {
                const auto key = std::make_pair(m.front(), m[j]);
                auto it = delays.find(key);
                int tau;
                if (it != delays.end()) {
                    tau = it->second;
                } else {
                    const SimVehicle& lead = vs[index[m.front()]];
                    const SimVehicle& f = vs[index[m[j]]];
                    tau = delay_steps(lead.state.X - f.state.X, f.state.vx, dt);
                }
                next_delays[key] = tau;
                sub_delay[i][j] = tau;
            }
        }
        delays = std::move(next_delays);

        auto make_problem = [&](SubsetMask mask) {
            CoalitionProblem p;
            p.mask = mask;
            for (int i = 0; i < n; ++i) {
                if (mask & (SubsetMask{1} << i)) p.members.push_back({index[subs[i].leader()], -1, 0});
            }
            for (int i = 0; i < n; ++i) {
                if (!(mask & (SubsetMask{1} << i))) continue;
                const int leader = index[subs[i].leader()];
                for (size_t j = 1; j < subs[i].members.size(); ++j) {
                    p.members.push_back({index[subs[i].members[j]], leader, sub_delay[i][j]});
                }
            }
            return p;
        };

        const SubsetMask grand = (SubsetMask{1} << n) - 1;
        std::vector<SubsetMask> singles;
        std::vector<SubsetMask> larger;
        for (int i = 0; i < n; ++i) singles.push_back(SubsetMask{1} << i);
        if (s.formation.mode == FormationMode::Algorithm) {
            for (SubsetMask m = 1; m <= grand; ++m) {
                if (std::popcount(m) > 1) larger.push_back(m);
            }
        } else if (s.formation.mode == FormationMode::Grand && n > 1) {
            larger.push_back(grand);
        }

        std::map<SubsetMask, SubsetSolve> solved;
        const std::uint64_t step_seed = mix_seed(s.seed, static_cast<std::uint64_t>(k));
        auto solve_batch = [&](const std::vector<SubsetMask>& masks) {
            std::vector<SubsetSolve> batch(masks.size());
            parallel_for(masks.size(), cfg.solver.threads, [&](size_t bi) {
                SubsetSolve& ss = batch[bi];
                ss.mask = masks[bi];
                ss.problem = make_problem(ss.mask);
                const auto dms = ss.problem.decision_makers();
                std::vector<std::vector<double>> warm;
                std::vector<double> from_singles;
                std::vector<double> from_plans;
                bool singles_ok = true;
                bool plans_ok = true;
                for (int dm : dms) {
                    const int sub = [&] {
                        for (int i = 0; i < n; ++i) {
                            if (index[subs[i].leader()] == dm) return i;
                        }
                        return -1;
                    }();
                    auto it = solved.find(SubsetMask{1} << sub);
                    if (it != solved.end() && it->second.result.variables.size() == static_cast<size_t>(2 * nc)) {
                        const auto& x = it->second.result.variables;
                        from_singles.insert(from_singles.end(), x.begin(), x.end());
                    } else {
                        singles_ok = false;
                    }
                    const auto& plan = vs[dm].plan;
                    if (plan.size() == static_cast<size_t>(2 * nc)) {
                        from_plans.insert(from_plans.end(), plan.begin(), plan.end());
                    } else {
                        plans_ok = false;
                    }
                }
                if (singles_ok && std::popcount(ss.mask) > 1) warm.push_back(from_singles);
                if (plans_ok) warm.push_back(from_plans);
                ss.result = solve_coalition(world, ss.problem, cfg, step_seed, warm);
            });
            for (auto& ss : batch) solved[ss.mask] = std::move(ss);
        };
        solve_batch(singles);
        solve_batch(larger);

        StepRecord rec;
        rec.step = k;
        rec.t = t;
        std::vector<SubsetMask> coalitions;
        std::vector<double> allocations(n, 0.0);
        std::vector<bool> defected(n, false);
        if (s.formation.mode == FormationMode::Algorithm) {
            const FormationOutcome fo = coalition_formation(
                n, [&](SubsetMask m) { return solved.at(m).result.objective; }, {s.formation.tolerance});
            coalitions = fo.coalitions;
            allocations = fo.allocations;
            defected = fo.defected;
        } else if (s.formation.mode == FormationMode::Grand) {
            coalitions = {grand};
        } else {
            coalitions = singles;
        }
        if (solved.count(grand)) rec.grand_value = solved.at(grand).result.objective;
        for (int i = 0; i < n; ++i) {
            const double standalone = solved.at(SubsetMask{1} << i).result.objective;
            rec.sub_coalitions.push_back({subs[i].members, standalone,
                                          s.formation.mode == FormationMode::Algorithm ? allocations[i] : standalone,
                                          defected[i]});
        }
        const CoalitionPartition partition = make_partition(subs, coalitions);
        rec.partition = partition.to_string();
        rec.type = partition.type;

        // actions from each coalition's plan
        std::vector<DecisionAction> action(vs.size(), kHoldAction);
        std::vector<int> coalition_of(vs.size(), -1);
        std::vector<bool> fallback(vs.size(), false);
        std::vector<bool> follower(vs.size(), false);
        for (size_t c = 0; c < coalitions.size(); ++c) {
            const SubsetSolve& ss = solved.at(coalitions[c]);
            const SolveResult& r = ss.result;
            for (size_t mi = 0; mi < r.agents.size(); ++mi) {
                const int a = r.agents[mi];
                coalition_of[a] = static_cast<int>(c);
                action[a] = r.sequences[mi].front();
                // braking only when it helps; tracking overshoot keeps the least-violating plan
                if (r.braking_violation[mi] > kViolationTol) fallback[a] = true;
            }
            for (const auto& m : ss.problem.members) follower[m.agent] = m.leader >= 0;
            const auto dms = ss.problem.decision_makers();
            for (size_t d = 0; d < dms.size(); ++d) {
                std::vector<double> plan(r.variables.begin() + 2 * nc * d, r.variables.begin() + 2 * nc * (d + 1));
                std::rotate(plan.begin(), plan.begin() + 2, plan.end());
                plan[2 * nc - 2] = 0.0;
                plan[2 * nc - 1] = 0.0;
                vs[dms[d]].plan = std::move(plan);
            }
        }
        for (size_t a = 0; a < vs.size(); ++a) {
            if (!vs[a].spec.player) continue;
            DecisionAction& act = action[a];
            if (fallback[a]) {
                rec.fallbacks.push_back(vs[a].spec.id);
                act.da_x = std::max(-cfg.limits.dax_max, -cfg.limits.ax_max - vs[a].u.ax);
                act.beta = 0;
            }
            // a follower replaying a lane change waits until the target lane is clear
            if (follower[a] && (act.beta == -1 || (vs[a].pending_commit && !vs[a].origin))) {
                const int target = vs[a].lane - 1;
                const bool allowed = !vs[a].origin && !vs[a].lane_change_used && cfg.lanes.has_lane(target);
                bool clear = allowed;
                if (allowed) {
                    for (size_t b = 0; b < vs.size(); ++b) {
                        if (b == a || !occupies(vs[b], target)) continue;
                        const double g = gap_between(pose_of(vs[b].state), pose_of(vs[a].state),
                                                     cfg.costs.weights.L_V);
                        if (g < cfg.limits.min_gap) clear = false;
                    }
                }
                if (clear) {
                    act.beta = -1;
                    vs[a].pending_commit = false;
                } else if (!allowed) {
                    vs[a].pending_commit = false;
                    act.beta = 0;
                } else {
                    if (act.beta == -1 && allowed) vs[a].pending_commit = true;
                    act.beta = 0;
                }
            }
        }
        const auto t1 = std::chrono::steady_clock::now();
        rec.solve_seconds = std::chrono::duration<double>(t1 - t0).count();
        for (const auto& [m, ss] : solved) rec.evaluations += ss.result.evaluations;

        // apply
        std::vector<VehicleState> before(vs.size());
        std::vector<ControlInput> prev_u(vs.size());
        for (size_t a = 0; a < vs.size(); ++a) {
            SimVehicle& v = vs[a];
            before[a] = v.state;
            prev_u[a] = v.u;
            if (!v.spec.player) continue;
            const DecisionAction& act = action[a];
            v.u.ax += act.da_x;
            v.u.delta_f += act.ddelta_f;
            if (act.beta == -1) {
                v.lane_change_used = true;
                v.change_elapsed = 0.0;
                v.origin = v.lane;
                v.lane -= 1;
                sum.lane_changes.push_back({v.spec.id, *v.origin, v.lane, t, std::nullopt});
                v.change_record = static_cast<int>(sum.lane_changes.size()) - 1;
            }
        }
        std::vector<double> ay(vs.size());
        for (size_t a = 0; a < vs.size(); ++a) {
            SimVehicle& v = vs[a];
            v.state = step_plant(before[a], v.u, cfg.vehicle, dt);
            ay[a] = lateral_acceleration(before[a], v.state, dt);
        }

        // realized costs at the pre-step states; roles are bound on the pre-step positions
        std::vector<SimVehicle> view = vs;
        for (size_t b = 0; b < vs.size(); ++b) view[b].state = before[b];
        for (size_t a = 0; a < vs.size(); ++a) {
            const SimVehicle& v = vs[a];
            TraceRow row;
            row.step = k;
            row.t = t;
            row.vehicle_id = v.spec.id;
            row.state = before[a];
            row.control = v.u;
            row.beta = action[a].beta;
            row.lane = v.lane;
            row.coalition_id = coalition_of[a];
            if (v.spec.player) {
                StepCostInput in;
                in.host = pose_of(before[a]);
                const bool committed = row.beta == -1;
                int lead = -1;
                int neighbor = -1;
                int eff = -1;
                if (committed) {
                    lead = nearest_ahead(view, a, *v.origin);
                    neighbor = nearest_in_lane(view, a, v.lane);
                    eff = nearest_ahead(view, a, *v.origin);
                    in.beta = -1;
                } else {
                    int best = -1;
                    for (int lane : {v.lane, v.origin.value_or(v.lane)}) {
                        const int c = nearest_ahead(view, a, lane);
                        if (c >= 0 && (best < 0 || view[c].state.X < view[best].state.X)) best = c;
                    }
                    lead = best;
                    const int ramp = cfg.lanes.ramp_lane;
                    const bool on_ramp = !v.origin && v.lane == ramp;
                    if (on_ramp && cfg.lanes.has_lane(v.lane - 1)) neighbor = nearest_in_lane(view, a, v.lane - 1);
                    if (neighbor < 0 && !on_ramp) neighbor = nearest_in_lane(view, a, v.lane, lead);
                    eff = nearest_ahead(view, a, v.lane);
                }
                auto mate = [&](int b) { return b >= 0 && sub_of[a] >= 0 && sub_of[b] == sub_of[a]; };
                if (lead >= 0 && !mate(lead)) in.lead = pose_of(before[lead]);
                if (neighbor >= 0 && !mate(neighbor)) in.neighbor = pose_of(before[neighbor]);
                if (eff >= 0) in.reference_lead_speed = before[eff].vx;
                LateralReference ref{cfg.lanes.center_y(v.lane), 0.0};
                if (v.origin && !committed) ref = cfg.lanes.change_reference(*v.origin, v.lane, v.change_elapsed, before[a].vx);
                in.lane_offset = before[a].Y - ref.y;
                in.heading_error = before[a].phi - ref.phi;
                in.jerk_x = (v.u.ax - prev_u[a].ax) / dt;
                in.jerk_y = v.last_ay ? (ay[a] - *v.last_ay) / dt : 0.0;
                in.speed_limit = cfg.lanes.speed_limit(committed ? *v.origin : v.lane);
                if (!committed && !v.origin && v.lane == cfg.lanes.ramp_lane) {
                    in.urgency = merge_urgency_cost(before[a].X, cfg.lanes, cfg.costs.weights);
                }
                row.cost = evaluate_step_cost(in, v.spec.profile, cfg.costs);
                const auto& R = cfg.characteristic.R;
                const DecisionAction& act = action[a];
                row.lambda = cfg.characteristic.Q * row.cost.J_total * row.cost.J_total +
                             R[0] * act.da_x * act.da_x + R[1] * act.ddelta_f * act.ddelta_f +
                             R[2] * act.beta * act.beta;
            }
            out.trace.rows.push_back(std::move(row));
        }

        for (size_t a = 0; a < vs.size(); ++a) {
            SimVehicle& v = vs[a];
            v.last_ay = ay[a];
            if (!v.spec.player) continue;
            v.history.push_back(action[a]);
            if (v.origin) v.change_elapsed += dt;
            // the change completes once the lateral reference has settled and the vehicle tracks it
            if (v.origin && v.change_elapsed >= cfg.lanes.change_duration - 1e-9 &&
                std::abs(v.state.Y - cfg.lanes.center_y(v.lane)) <= cfg.limits.dy_max &&
                std::abs(v.state.phi) <= cfg.limits.dphi_max) {
                v.origin.reset();
                if (v.change_record >= 0) sum.lane_changes[v.change_record].end_t = t + dt;
                v.change_record = -1;
            }
        }
        sum.timeline.push_back(std::move(rec));
        sum.steps = k + 1;

        for (size_t a = 0; a < vs.size() && !sum.abort; ++a) {
            for (size_t b = a + 1; b < vs.size(); ++b) {
                const double g = body_gap(vs[a].state, vs[b].state, cfg.vehicle);
                if (g < 0) {
                    sum.abort = AbortInfo{k, t + dt, vs[a].spec.id, vs[b].spec.id, g};
                    break;
                }
            }
        }
        if (sum.abort) break;
    }

    sum.completed = !sum.abort;
    const RunSummary stats = summarize_trace(out.trace, nullptr);
    sum.vehicles = stats.vehicles;
    for (auto& vsum : sum.vehicles) {
        for (const auto& rec : sum.timeline) {
            vsum.fallbacks += static_cast<int>(std::count(rec.fallbacks.begin(), rec.fallbacks.end(), vsum.id));
        }
        const auto it = std::find_if(vs.begin(), vs.end(), [&](const SimVehicle& v) { return v.spec.id == vsum.id; });
        if (it != vs.end()) {
            vsum.final_vx = it->state.vx;
            vsum.final_lane = it->lane;
            vsum.player = it->spec.player;
            vsum.profile = it->spec.profile.name;
        }
    }
    double total = 0.0;
    double mx = 0.0;
    double evals = 0.0;
    for (const auto& rec : sum.timeline) {
        total += rec.solve_seconds;
        mx = std::max(mx, rec.solve_seconds);
        evals += static_cast<double>(rec.evaluations);
    }
    if (!sum.timeline.empty()) {
        sum.solver.mean_step_seconds = total / sum.timeline.size();
        sum.solver.mean_evaluations = evals / sum.timeline.size();
    }
    sum.solver.max_step_seconds = mx;
    sum.solver.total_seconds = total;
    return out;
}

RunSummary summarize_trace(const Trace& trace, const Scenario* config) {
    RunSummary sum;
    if (config) {
        sum.config = *config;
        sum.scenario = config->name;
        sum.seed = config->seed;
        sum.formation = std::string(formation_mode_name(config->formation.mode));
    }
    const VehicleParams params = config ? config->planner.vehicle : VehicleParams{};

    std::vector<VehicleId> order;
    std::map<VehicleId, VehicleSummary> by_id;
    std::map<VehicleId, int> counts;
    std::map<int, std::vector<const TraceRow*>> by_step;
    for (const auto& r : trace.rows) {
        if (!by_id.count(r.vehicle_id)) {
            order.push_back(r.vehicle_id);
            VehicleSummary v;
            v.id = r.vehicle_id;
            v.player = r.coalition_id >= 0;
            v.min_gap = std::numeric_limits<double>::infinity();
            by_id[r.vehicle_id] = v;
        }
        VehicleSummary& v = by_id[r.vehicle_id];
        v.rms_cost += r.cost.J_total * r.cost.J_total;
        v.rms_lambda += r.lambda * r.lambda;
        v.rms_safety += r.cost.J_s * r.cost.J_s;
        v.rms_comfort += r.cost.J_c * r.cost.J_c;
        v.rms_efficiency += r.cost.J_e * r.cost.J_e;
        v.final_vx = r.state.vx;
        v.final_lane = r.lane;
        counts[r.vehicle_id] += 1;
        by_step[r.step].push_back(&r);
    }
    for (const auto& [step, rows] : by_step) {
        for (size_t i = 0; i < rows.size(); ++i) {
            for (size_t j = i + 1; j < rows.size(); ++j) {
                const double g = body_gap(rows[i]->state, rows[j]->state, params);
                auto& a = by_id[rows[i]->vehicle_id];
                auto& b = by_id[rows[j]->vehicle_id];
                a.min_gap = std::min(a.min_gap, g);
                b.min_gap = std::min(b.min_gap, g);
            }
        }
        StepRecord rec;
        rec.step = step;
        rec.t = rows.front()->t;
        std::map<int, std::vector<VehicleId>> groups;
        for (const TraceRow* r : rows) {
            if (r->coalition_id >= 0) groups[r->coalition_id].push_back(r->vehicle_id);
        }
        std::string text;
        for (const auto& [id, members] : groups) {
            if (!text.empty()) text += ' ';
            text += '{';
            for (size_t m = 0; m < members.size(); ++m) {
                if (m) text += ',';
                text += members[m];
            }
            text += '}';
        }
        rec.partition = text;
        rec.type = groups.size() == 1 ? CoalitionType::Grand
                                      : (std::any_of(groups.begin(), groups.end(),
                                                     [](const auto& g) { return g.second.size() > 1; })
                                             ? CoalitionType::MultiPlayer
                                             : CoalitionType::SinglePlayer);
        sum.timeline.push_back(std::move(rec));
    }
    for (const auto& id : order) {
        VehicleSummary v = by_id[id];
        const double n = counts[id];
        v.rms_cost = std::sqrt(v.rms_cost / n);
        v.rms_lambda = std::sqrt(v.rms_lambda / n);
        v.rms_safety = std::sqrt(v.rms_safety / n);
        v.rms_comfort = std::sqrt(v.rms_comfort / n);
        v.rms_efficiency = std::sqrt(v.rms_efficiency / n);
        sum.vehicles.push_back(v);
    }
    sum.steps = static_cast<int>(by_step.size());
    return sum;
}

}  // namespace cavgame
