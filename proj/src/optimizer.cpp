#include "cavgame/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "cavgame/errors.hpp"

namespace cavgame {

double characteristic_value(std::span<const double> costs, std::span<const DecisionAction> actions,
                            const CharacteristicParams& cp) {
    double total = 0.0;
    for (double j : costs) total += cp.Q * j * j;
    for (const auto& a : actions) {
        const double b = a.beta;
        total += cp.R[0] * a.da_x * a.da_x + cp.R[1] * a.ddelta_f * a.ddelta_f + cp.R[2] * b * b;
    }
    return total;
}

std::vector<std::vector<int>> enumerate_beta(std::span<const int> lanes, const LaneModel& lane_model) {
    std::vector<std::vector<int>> out;
    const size_t n = lanes.size();
    for (size_t bits = 0; bits < (size_t{1} << n); ++bits) {
        std::vector<int> a(n, 0);
        bool ok = true;
        for (size_t i = 0; i < n; ++i) {
            if (bits & (size_t{1} << i)) {
                a[i] = -1;
                ok = ok && lane_model.has_lane(lanes[i] - 1);
            }
        }
        if (ok) out.push_back(std::move(a));
    }
    return out;
}

void SolverConfig::validate() const {
    if (population < 4) throw std::invalid_argument("population must be at least 4");
    if (iterations < 0 || polish_rounds < 0) throw std::invalid_argument("iteration counts must be nonnegative");
    if (!(mutation > 0 && mutation <= 2)) throw std::invalid_argument("mutation must be in (0, 2]");
    if (!(crossover >= 0 && crossover <= 1)) throw std::invalid_argument("crossover must be in [0, 1]");
    if (!(penalty > 0)) throw std::invalid_argument("penalty must be positive");
    if (threads < 1) throw std::invalid_argument("threads must be at least 1");
}

PlayerModel build_player_model(const AgentSnapshot& a, const PlannerConfig& cfg) {
    const Jacobians J = linearize(a.state, a.last_control, cfg.vehicle);
    const StateVector x0 = a.state.vector();
    const InputVector u0 = a.last_control.vector();
    const StateVector c = continuous_derivative(a.state, a.last_control, cfg.vehicle) - J.A * x0 - J.B * u0;
    const AffineDiscreteModel d = discretize_affine(J.A, J.B, c, cfg.dt);
    PlayerModel m;
    m.theta = augment(a.state, a.last_control);
    m.op = std::make_shared<const PredictionOperator>(build_augmented(d.Ad, d.Bd), cfg.horizon);
    m.drift = d.drift;
    m.free = m.op->free_response(m.theta, m.drift);
    return m;
}

WorldSnapshot make_snapshot(int step, std::vector<AgentSnapshot> agents, const PlannerConfig& cfg) {
    WorldSnapshot w;
    w.step = step;
    w.agents = std::move(agents);
    w.models.resize(w.agents.size());
    for (size_t i = 0; i < w.agents.size(); ++i) {
        if (w.agents[i].player) w.models[i] = build_player_model(w.agents[i], cfg);
    }
    return w;
}

std::vector<int> CoalitionProblem::decision_makers() const {
    std::vector<int> out;
    for (const auto& m : members) {
        if (m.leader < 0) out.push_back(m.agent);
    }
    return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    auto splitmix = [](std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    };
    std::uint64_t h = splitmix(seed);
    h = splitmix(h ^ a);
    h = splitmix(h ^ b);
    h = splitmix(h ^ c);
    return h;
}

namespace {

constexpr double kFeasibleTol = 1e-6;
constexpr int kNone = -1;

using LaneSet = unsigned;

LaneSet lane_bit(int lane) { return lane >= 1 ? LaneSet{1} << lane : 0; }

struct MemberSetup {
    int agent = 0;
    const PlayerModel* model = nullptr;
    int slot = 0;  // decision-maker slot driving this member
    bool decision_maker = true;
    int platoon = kNone;  // agent index of the sub-coalition leader
    int commit = kNone;  // action step at which a lane change starts within the horizon
    std::vector<int> source;              // per increment q: index into candidate block, or kNone
    std::vector<InputVector> fixed;       // per increment q when source is kNone
    std::vector<int> action_beta;         // per increment q
    // per predicted state p = 1..Np (index p-1)
    std::vector<int> cost_beta;
    std::vector<int> lead;
    std::vector<int> neighbor;
    std::vector<int> eff_lead;
    std::vector<char> lane_bound;
    std::vector<char> urgent;
    double ref_center = 0.0;
    std::vector<LateralReference> ref;  // lane-keeping reference per predicted state
    double speed_limit = 30.0;
};

// Evaluates candidate increment vectors for one coalition and one beta assignment.
class PlanEvaluator {
public:
    PlanEvaluator(const WorldSnapshot& w, const CoalitionProblem& prob, const PlannerConfig& cfg,
                  std::span<const int> beta)
        : w_(w), cfg_(cfg), np_(cfg.horizon.np), nc_(cfg.horizon.nc) {
        const auto dms = prob.decision_makers();
        if (beta.size() != dms.size()) throw DimensionMismatch("one beta per decision maker required");
        n_agents_ = static_cast<int>(w.agents.size());
        member_of_.assign(n_agents_, kNone);
        std::vector<int> slot_of(n_agents_, kNone);
        for (size_t i = 0; i < dms.size(); ++i) slot_of[dms[i]] = static_cast<int>(i);
        dim_ = static_cast<int>(2 * nc_ * dms.size());
        dm_agents_ = dms;

        for (const auto& cm : prob.members) {
            MemberSetup m;
            m.agent = cm.agent;
            const AgentSnapshot& a = w.agents[cm.agent];
            if (!a.player || !w.models[cm.agent]) throw std::invalid_argument("coalition member " + a.id + " is not a player");
            m.model = &*w.models[cm.agent];
            m.decision_maker = cm.leader < 0;
            m.platoon = m.decision_maker ? cm.agent : cm.leader;
            m.slot = m.decision_maker ? slot_of[cm.agent] : slot_of[cm.leader];
            if (m.slot == kNone) throw std::invalid_argument("leader of " + a.id + " is not a decision maker");
            const int b = beta[m.slot];
            m.source.assign(nc_, kNone);
            m.fixed.assign(nc_, InputVector::Zero());
            m.action_beta.assign(nc_, 0);

            if (m.decision_maker) {
                for (int q = 0; q < nc_; ++q) m.source[q] = q;
                if (b == -1 && a.may_change_lane()) m.commit = 0;
                for (int q = 0; q < nc_; ++q) m.action_beta[q] = b;
            } else {
                const AgentSnapshot& lead = w.agents[cm.leader];
                const int tau = cm.delay;
                const int hist = static_cast<int>(lead.history.size());
                for (int p = 0; p < np_; ++p) {
                    const int rel = p - tau;
                    int replay_beta = 0;
                    if (rel >= 0) {
                        replay_beta = b;
                        if (p < nc_ && rel < nc_) m.source[p] = rel;
                    } else if (hist + rel >= 0) {
                        const DecisionAction& h = lead.history[hist + rel];
                        replay_beta = h.beta;
                        if (p < nc_) m.fixed[p] = InputVector(h.da_x, h.ddelta_f);
                    }
                    if (p < nc_) m.action_beta[p] = replay_beta;
                    if (replay_beta == -1 && m.commit == kNone && a.may_change_lane() && cfg.lanes.has_lane(a.lane - 1)) {
                        m.commit = p;
                    }
                }
            }
            member_of_[cm.agent] = static_cast<int>(members_.size());
            members_.push_back(std::move(m));
        }

        bind_roles();
        allocate();
    }

    int dimension() const { return dim_; }
    const std::vector<int>& decision_makers() const { return dm_agents_; }

    // Bounds for variable d given the increments before it in the same block.
    void project(std::span<double> x) const {
        const auto& lim = cfg_.limits;
        for (size_t s = 0; s < dm_agents_.size(); ++s) {
            const ControlInput& u0 = w_.agents[dm_agents_[s]].last_control;
            double ax = u0.ax;
            double df = u0.delta_f;
            for (int q = 0; q < nc_; ++q) {
                double& da = x[2 * nc_ * s + 2 * q];
                double& dd = x[2 * nc_ * s + 2 * q + 1];
                da = clamp_step(da, ax, lim.dax_max, lim.ax_max);
                dd = clamp_step(dd, df, lim.ddelta_max, lim.delta_max);
                ax += da;
                df += dd;
            }
        }
    }

    double lower(int d) const { return d % 2 == 0 ? -cfg_.limits.dax_max : -cfg_.limits.ddelta_max; }
    double upper(int d) const { return -lower(d); }

    // Returns the penalized objective; fills per-member lambda and violation.
    double evaluate(std::span<const double> x) {
        predict_members(x);
        double total = 0.0;
        double viol = 0.0;
        for (size_t i = 0; i < members_.size(); ++i) {
            member_cost(i, x, nullptr);
            total += lambda_[i];
            viol += violation_[i];
        }
        last_total_ = total;
        last_violation_ = viol;
        return total + cfg_.solver.penalty * viol;
    }

    std::vector<MemberEvaluation> inspect(std::span<const double> x) {
        predict_members(x);
        std::vector<MemberEvaluation> out(members_.size());
        for (size_t i = 0; i < members_.size(); ++i) {
            member_cost(i, x, &out[i]);
            out[i].states.assign(states_[i].begin(), states_[i].end());
            out[i].controls.assign(controls_[i].begin(), controls_[i].end());
            out[i].lambda = lambda_[i];
            out[i].violation = violation_[i];
            out[i].braking_violation = braking_violation_[i];
        }
        return out;
    }

    double member_lambda(size_t i) const { return lambda_[i]; }
    double member_violation(size_t i) const { return violation_[i]; }
    double member_braking_violation(size_t i) const { return braking_violation_[i]; }
    double last_total() const { return last_total_; }
    double last_violation() const { return last_violation_; }
    const std::vector<MemberSetup>& members() const { return members_; }

    std::vector<DecisionAction> member_actions(size_t i, std::span<const double> x) const {
        std::vector<DecisionAction> out(nc_);
        for (int q = 0; q < nc_; ++q) {
            const InputVector du = increment(members_[i], q, x);
            out[q] = {du(0), du(1), members_[i].action_beta[q]};
        }
        return out;
    }

private:
    static double clamp_step(double d, double current, double step_max, double abs_max) {
        const double lo = std::max(-step_max, -abs_max - current);
        const double hi = std::min(step_max, abs_max - current);
        if (lo > hi) return std::clamp(0.0, -step_max, step_max);
        return std::clamp(d, lo, hi);
    }

    InputVector increment(const MemberSetup& m, int q, std::span<const double> x) const {
        if (m.source[q] == kNone) return m.fixed[q];
        const size_t base = static_cast<size_t>(2 * nc_ * m.slot + 2 * m.source[q]);
        return InputVector(x[base], x[base + 1]);
    }

    LaneSet occupancy(int agent, int p) const {
        const AgentSnapshot& a = w_.agents[agent];
        LaneSet s = lane_bit(a.lane);
        if (a.origin_lane) s |= lane_bit(*a.origin_lane);
        const int mi = member_of_[agent];
        if (mi != kNone && members_[mi].commit != kNone && p > members_[mi].commit) s |= lane_bit(a.lane - 1);
        return s;
    }

    int nearest_ahead(int self, int p, LaneSet lanes) const {
        const double x0 = w_.agents[self].state.X;
        int best = kNone;
        double best_dx = std::numeric_limits<double>::infinity();
        for (int a = 0; a < n_agents_; ++a) {
            if (a == self || !(occupancy(a, p) & lanes)) continue;
            const double dx = w_.agents[a].state.X - x0;
            if (dx > 0 && dx < best_dx) {
                best_dx = dx;
                best = a;
            }
        }
        return best;
    }

    int nearest_in_lane(int self, int p, LaneSet lanes, int exclude = kNone) const {
        const double x0 = w_.agents[self].state.X;
        int best = kNone;
        double best_dx = std::numeric_limits<double>::infinity();
        for (int a = 0; a < n_agents_; ++a) {
            if (a == self || a == exclude || !(occupancy(a, p) & lanes)) continue;
            const double dx = std::abs(w_.agents[a].state.X - x0);
            if (dx < best_dx) {
                best_dx = dx;
                best = a;
            }
        }
        return best;
    }

    void bind_roles() {
        for (auto& m : members_) {
            const AgentSnapshot& a = w_.agents[m.agent];
            m.ref_center = cfg_.lanes.center_y(a.lane);
            m.ref.assign(np_, {m.ref_center, 0.0});
            m.speed_limit = cfg_.lanes.speed_limit(a.lane);
            m.cost_beta.assign(np_, 0);
            m.lead.assign(np_, kNone);
            m.neighbor.assign(np_, kNone);
            m.eff_lead.assign(np_, kNone);
            m.lane_bound.assign(np_, 0);
            m.urgent.assign(np_, 0);
            for (int p = 1; p <= np_; ++p) {
                const int i = p - 1;
                const bool committed = m.commit != kNone && p > m.commit;
                if (committed) {
                    const int target = a.lane - 1;
                    m.cost_beta[i] = -1;
                    m.lead[i] = nearest_ahead(m.agent, p, lane_bit(a.lane));
                    m.neighbor[i] = nearest_in_lane(m.agent, p, lane_bit(target));
                    // the desired speed keeps its current-lane reference until the switch
                    m.eff_lead[i] = nearest_ahead(m.agent, p, lane_bit(a.lane));
                } else {
                    m.lead[i] = nearest_ahead(m.agent, p, occupancy(m.agent, p));
                    // a ramp vehicle has to leave its lane, so its neighbor sits in the lane it merges into;
                    // elsewhere the neighbor is the closest other vehicle in the own lane
                    const int ramp = cfg_.lanes.ramp_lane;
                    if (!a.changing() && a.lane == ramp && cfg_.lanes.has_lane(a.lane - 1)) {
                        m.neighbor[i] = nearest_in_lane(m.agent, p, lane_bit(a.lane - 1));
                    }
                    if (m.neighbor[i] == kNone && !(a.lane == ramp && !a.changing())) {
                        m.neighbor[i] = nearest_in_lane(m.agent, p, lane_bit(a.lane), m.lead[i]);
                    }
                    m.eff_lead[i] = nearest_ahead(m.agent, p, lane_bit(a.lane));
                    m.lane_bound[i] = !a.changing();
                    if (a.changing()) {
                        m.ref[i] = cfg_.lanes.change_reference(*a.origin_lane, a.lane, a.change_elapsed + p * cfg_.dt,
                                                               a.state.vx);
                    }
                    m.urgent[i] = !a.changing() && a.lane == cfg_.lanes.ramp_lane;
                }
            }
        }
    }

    void allocate() {
        poses_.assign(n_agents_, std::vector<AgentPose>(np_ + 1));
        for (int a = 0; a < n_agents_; ++a) {
            const VehicleState& s = w_.agents[a].state;
            for (int p = 0; p <= np_; ++p) poses_[a][p] = {s.X + s.vx * cfg_.dt * p, s.Y, s.vx, s.phi};
        }
        states_.assign(members_.size(), std::vector<VehicleState>(np_ + 1));
        controls_.assign(members_.size(), std::vector<ControlInput>(np_));
        gaps_.assign(np_, 0.0);
        lambda_.assign(members_.size(), 0.0);
        violation_.assign(members_.size(), 0.0);
        braking_violation_.assign(members_.size(), 0.0);
        du_.resize(2 * nc_);
        y_.resize(6 * np_);
    }

    void predict_members(std::span<const double> x) {
        for (size_t i = 0; i < members_.size(); ++i) {
            const MemberSetup& m = members_[i];
            const AgentSnapshot& a = w_.agents[m.agent];
            for (int q = 0; q < nc_; ++q) du_.segment<2>(2 * q) = increment(m, q, x);
            y_.noalias() = m.model->free;
            y_.noalias() += m.model->op->dbar() * du_;
            auto& st = states_[i];
            st[0] = a.state;
            for (int p = 1; p <= np_; ++p) st[p] = VehicleState::from_vector(y_.segment<6>(6 * (p - 1)));
            ControlInput u = a.last_control;
            for (int p = 0; p < np_; ++p) {
                if (p < nc_) {
                    u.ax += du_(2 * p);
                    u.delta_f += du_(2 * p + 1);
                }
                controls_[i][p] = u;
            }
            for (int p = 0; p <= np_; ++p) poses_[m.agent][p] = {st[p].X, st[p].Y, st[p].vx, st[p].phi};
        }
    }

    bool platoon_mate(const MemberSetup& m, int agent) const {
        if (agent == kNone || agent == m.agent || member_of_[agent] == kNone) return false;
        return members_[member_of_[agent]].platoon == m.platoon;
    }

    std::optional<AgentPose> pose(int agent, int p) const {
        if (agent == kNone) return std::nullopt;
        return poses_[agent][p];
    }

    void member_cost(size_t i, std::span<const double> x, MemberEvaluation* detail) {
        const MemberSetup& m = members_[i];
        const AgentSnapshot& a = w_.agents[m.agent];
        const auto& st = states_[i];
        const auto& u = controls_[i];
        const double dt = cfg_.dt;
        const CostWeights& cw = cfg_.costs.weights;

        double sum_sq = 0.0;
        std::optional<double> ay_prev = a.last_lateral_accel;
        double ax_prev = a.last_control.ax;
        for (int p = 1; p <= np_; ++p) {
            const int k = p - 1;
            const double ay = lateral_acceleration(st[k], st[p], dt);
            StepCostInput in;
            in.host = {st[p].X, st[p].Y, st[p].vx, st[p].phi};
            // the spacing to a platoon mate follows from the replay delay, so only the gap bound sees it
            in.lead = platoon_mate(m, m.lead[k]) ? std::nullopt : pose(m.lead[k], p);
            in.neighbor = platoon_mate(m, m.neighbor[k]) ? std::nullopt : pose(m.neighbor[k], p);
            if (m.eff_lead[k] != kNone) in.reference_lead_speed = poses_[m.eff_lead[k]][p].v;
            in.beta = m.cost_beta[k];
            in.lane_offset = st[p].Y - m.ref[k].y;
            in.heading_error = st[p].phi - m.ref[k].phi;
            in.jerk_x = (u[k].ax - ax_prev) / dt;
            in.jerk_y = ay_prev ? (ay - *ay_prev) / dt : 0.0;
            in.speed_limit = m.speed_limit;
            in.urgency = m.urgent[k] ? merge_urgency_cost(st[p].X, cfg_.lanes, cw) : 0.0;
            const CostBreakdown c = evaluate_step_cost(in, a.profile, cfg_.costs);
            sum_sq += cfg_.characteristic.Q * c.J_total * c.J_total;
            if (detail) detail->costs.push_back(c);

            double g = std::numeric_limits<double>::infinity();
            if (const auto lead = pose(m.lead[k], p)) g = std::min(g, gap_between(*lead, in.host, cw.L_V));
            if (const auto nb = pose(m.neighbor[k], p); nb && in.beta == -1) g = std::min(g, gap_between(*nb, in.host, cw.L_V));
            gaps_[k] = g;
            ay_prev = ay;
            ax_prev = u[k].ax;
        }

        double effort = 0.0;
        const auto& R = cfg_.characteristic.R;
        for (int q = 0; q < nc_; ++q) {
            const InputVector du = increment(m, q, x);
            const double b = m.action_beta[q];
            effort += R[0] * du(0) * du(0) + R[1] * du(1) * du(1) + R[2] * b * b;
        }
        lambda_[i] = sum_sq + effort;

        bool any_bound = false;
        for (char c : m.lane_bound) any_bound |= c != 0;
        TrajectoryCheck t;
        t.states = st;
        t.controls = u;
        t.previous_control = a.last_control;
        t.previous_lateral_accel = a.last_lateral_accel;
        t.dt = dt;
        t.reference_center_y = m.ref_center;
        t.speed_limit = m.speed_limit;
        // lane-tracking bounds only when the vehicle keeps its lane over the whole horizon
        t.lane_keeping = any_bound && std::all_of(m.lane_bound.begin(), m.lane_bound.end(), [](char c) { return c != 0; });
        t.gaps = gaps_;
        const ViolationSplit vs = split_violation(t, cfg_.limits);
        violation_[i] = vs.total;
        braking_violation_[i] = vs.braking;
        if (detail) detail->actions = member_actions(i, x);
    }

    const WorldSnapshot& w_;
    const PlannerConfig& cfg_;
    int np_;
    int nc_;
    int n_agents_ = 0;
    int dim_ = 0;
    std::vector<int> dm_agents_;
    std::vector<int> member_of_;
    std::vector<MemberSetup> members_;
    std::vector<std::vector<AgentPose>> poses_;
    std::vector<std::vector<VehicleState>> states_;
    std::vector<std::vector<ControlInput>> controls_;
    std::vector<double> gaps_;
    std::vector<double> lambda_;
    std::vector<double> violation_;
    std::vector<double> braking_violation_;
    Eigen::VectorXd du_;
    Eigen::VectorXd y_;
    double last_total_ = 0.0;
    double last_violation_ = 0.0;
};

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    int below(int n) { return static_cast<int>(gen_() % static_cast<std::uint64_t>(n)); }

private:
    std::mt19937_64 gen_;
};

struct SearchOutcome {
    std::vector<double> x;
    double f = std::numeric_limits<double>::infinity();
    long evaluations = 0;
};

SearchOutcome search(PlanEvaluator& ev, const SolverConfig& sc, std::uint64_t seed,
                     std::span<const std::vector<double>> warm) {
    const int D = ev.dimension();
    SearchOutcome out;
    if (D == 0) {
        out.f = ev.evaluate({});
        out.evaluations = 1;
        return out;
    }
    Rng rng(seed);
    const int NP = sc.population;
    std::vector<std::vector<double>> pop(NP, std::vector<double>(D, 0.0));
    std::vector<double> fit(NP);
    int next = 1;
    for (const auto& w : warm) {
        if (next >= NP) break;
        if (static_cast<int>(w.size()) != D) throw DimensionMismatch("warm start has wrong dimension");
        pop[next++] = w;
    }
    for (int i = next; i < NP; ++i) {
        for (int d = 0; d < D; ++d) pop[i][d] = ev.lower(d) + rng.uniform() * (ev.upper(d) - ev.lower(d));
    }
    int best = 0;
    for (int i = 0; i < NP; ++i) {
        ev.project(pop[i]);
        fit[i] = ev.evaluate(pop[i]);
        if (fit[i] < fit[best]) best = i;
    }
    out.evaluations += NP;

    std::vector<double> trial(D);
    for (int it = 0; it < sc.iterations; ++it) {
        for (int i = 0; i < NP; ++i) {
            int r1, r2, r3;
            do r1 = rng.below(NP); while (r1 == i);
            do r2 = rng.below(NP); while (r2 == i || r2 == r1);
            do r3 = rng.below(NP); while (r3 == i || r3 == r1 || r3 == r2);
            const int jrand = rng.below(D);
            for (int d = 0; d < D; ++d) {
                if (d == jrand || rng.uniform() < sc.crossover) {
                    const double v = pop[r1][d] + sc.mutation * (pop[r2][d] - pop[r3][d]);
                    trial[d] = std::clamp(v, ev.lower(d), ev.upper(d));
                } else {
                    trial[d] = pop[i][d];
                }
            }
            ev.project(trial);
            const double f = ev.evaluate(trial);
            ++out.evaluations;
            if (f <= fit[i]) {
                pop[i] = trial;
                fit[i] = f;
                if (f < fit[best]) best = i;
            }
        }
    }

    // coordinate pattern search around the best member
    std::vector<double> x = pop[best];
    double fx = fit[best];
    std::vector<double> step(D);
    for (int d = 0; d < D; ++d) step[d] = 0.25 * (ev.upper(d) - ev.lower(d));
    for (int round = 0; round < sc.polish_rounds; ++round) {
        bool improved = true;
        int sweeps = 0;
        while (improved && sweeps < 4) {
            improved = false;
            ++sweeps;
            for (int d = 0; d < D; ++d) {
                for (double sign : {1.0, -1.0}) {
                    trial = x;
                    trial[d] = std::clamp(x[d] + sign * step[d], ev.lower(d), ev.upper(d));
                    ev.project(trial);
                    if (trial[d] == x[d]) continue;
                    const double f = ev.evaluate(trial);
                    ++out.evaluations;
                    if (f < fx) {
                        x = trial;
                        fx = f;
                        improved = true;
                        break;
                    }
                }
            }
        }
        for (double& s : step) s *= 0.5;
    }
    out.x = std::move(x);
    out.f = fx;
    return out;
}

}  // namespace

std::vector<MemberEvaluation> evaluate_plan(const WorldSnapshot& world, const CoalitionProblem& problem,
                                            const PlannerConfig& cfg, std::span<const int> beta,
                                            std::span<const double> variables) {
    PlanEvaluator ev(world, problem, cfg, beta);
    if (static_cast<int>(variables.size()) != ev.dimension()) throw DimensionMismatch("variable vector has wrong size");
    return ev.inspect(variables);
}

SolveResult solve_coalition(const WorldSnapshot& world, const CoalitionProblem& problem, const PlannerConfig& cfg,
                            std::uint64_t seed, std::span<const std::vector<double>> warm_starts) {
    cfg.solver.validate();
    const auto dms = problem.decision_makers();
    std::vector<int> authority;  // indices into dms with lane-change authority
    std::vector<int> lanes;
    for (size_t i = 0; i < dms.size(); ++i) {
        const AgentSnapshot& a = world.agents[dms[i]];
        if (a.may_change_lane()) {
            authority.push_back(static_cast<int>(i));
            lanes.push_back(a.lane);
        }
    }
    const auto assignments = enumerate_beta(lanes, cfg.lanes);

    SolveResult best;
    bool have = false;
    long evaluations = 0;
    for (size_t ai = 0; ai < assignments.size(); ++ai) {
        std::vector<int> beta(dms.size(), 0);
        for (size_t k = 0; k < authority.size(); ++k) beta[authority[k]] = assignments[ai][k];

        PlanEvaluator ev(world, problem, cfg, beta);
        const SearchOutcome so = search(ev, cfg.solver, mix_seed(seed, problem.mask, ai), warm_starts);
        evaluations += so.evaluations;
        ev.evaluate(so.x);
        const bool feasible = ev.last_violation() <= kFeasibleTol;
        const bool better = !have || (feasible && !best.feasible) ||
                            (feasible == best.feasible && so.f < best.objective);
        if (!better) continue;
        have = true;
        SolveResult r;
        r.beta = beta;
        r.variables = so.x;
        r.objective = so.f;
        r.total = ev.last_total();
        r.feasible = feasible;
        for (size_t i = 0; i < ev.members().size(); ++i) {
            r.agents.push_back(ev.members()[i].agent);
            r.sequences.push_back(ev.member_actions(i, so.x));
            r.lambda.push_back(ev.member_lambda(i));
            r.violation.push_back(ev.member_violation(i));
            r.braking_violation.push_back(ev.member_braking_violation(i));
        }
        best = std::move(r);
    }
    best.evaluations = evaluations;
    return best;
}

std::vector<DecisionAction> receding_horizon_apply(const SolveResult& result) {
    if (!result.feasible) throw Infeasible("no constraint-satisfying plan");
    std::vector<DecisionAction> out;
    out.reserve(result.sequences.size());
    for (const auto& seq : result.sequences) out.push_back(seq.front());
    return out;
}

}  // namespace cavgame
