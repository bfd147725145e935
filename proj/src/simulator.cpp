#include "vrs/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace vrs {

std::vector<RequestEvent> generate_request_stream(const World& world,
                                                  const SimLoopConfig& sim, long count,
                                                  std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // Users are sampled proportionally to activity_weight: active users see
  // more requests, matching the impression weighting of the eligible ratio.
  std::vector<double> cumulative(world.users.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < world.users.size(); ++i) {
    total += static_cast<double>(world.users[i].activity_weight);
    cumulative[i] = total;
  }
  if (total <= 0.0) throw ConfigError("generate_request_stream: no user activity");

  std::vector<RequestEvent> events;
  events.reserve(static_cast<std::size_t>(count));
  std::vector<char> in_set(world.ads.size(), 0);
  for (long r = 0; r < count; ++r) {
    int user_index = -1;
    for (int attempt = 0; attempt < 256; ++attempt) {
      const double u = unif(rng) * total;
      const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      const int idx = static_cast<int>(std::distance(cumulative.begin(), it));
      if (idx < static_cast<int>(world.users.size()) &&
          !world.eligible_ads[static_cast<std::size_t>(idx)].empty()) {
        user_index = idx;
        break;
      }
    }
    if (user_index < 0) {
      throw ConfigError("generate_request_stream: could not find users with eligible ads");
    }

    const auto& eligible = world.eligible_ads[static_cast<std::size_t>(user_index)];
    RequestEvent ev;
    ev.user_index = user_index;
    const int want = sim.candidates_per_request;
    if (static_cast<int>(eligible.size()) <= want) {
      ev.candidate_ad_indices = eligible;
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
      while (static_cast<int>(ev.candidate_ad_indices.size()) < want) {
        const int ad = eligible[pick(rng)];
        if (!in_set[static_cast<std::size_t>(ad)]) {
          in_set[static_cast<std::size_t>(ad)] = 1;
          ev.candidate_ad_indices.push_back(ad);
        }
      }
      for (int ad : ev.candidate_ad_indices) in_set[static_cast<std::size_t>(ad)] = 0;
    }

    const bool has_housing =
        std::any_of(ev.candidate_ad_indices.begin(), ev.candidate_ad_indices.end(),
                    [&](int ad) { return world.ads[static_cast<std::size_t>(ad)].is_housing; });
    const auto& housing = world.eligible_housing[static_cast<std::size_t>(user_index)];
    if (!has_housing && !housing.empty() && unif(rng) < sim.housing_candidate_prob) {
      std::uniform_int_distribution<std::size_t> hpick(0, housing.size() - 1);
      std::uniform_int_distribution<std::size_t> slot(0, ev.candidate_ad_indices.size() - 1);
      ev.candidate_ad_indices[slot(rng)] = housing[hpick(rng)];
    }

    ev.slot_count = std::min<int>(sim.slot_count,
                                  static_cast<int>(ev.candidate_ad_indices.size()));
    events.push_back(std::move(ev));
  }
  return events;
}

std::vector<int> run_auction(std::span<const double> adjusted_totals,
                             std::span<const std::int64_t> ad_ids, int slot_count) {
  std::vector<int> order(adjusted_totals.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (adjusted_totals[static_cast<std::size_t>(a)] !=
        adjusted_totals[static_cast<std::size_t>(b)]) {
      return adjusted_totals[static_cast<std::size_t>(a)] >
             adjusted_totals[static_cast<std::size_t>(b)];
    }
    return ad_ids[static_cast<std::size_t>(a)] < ad_ids[static_cast<std::size_t>(b)];
  });
  const int winners = std::min<int>(slot_count, static_cast<int>(order.size()));
  order.resize(static_cast<std::size_t>(winners));
  return order;
}

Arm arm_from_name(const std::string& name) {
  if (name == "control") return Arm::Control;
  if (name == "test1") return Arm::Test1;
  if (name == "test2") return Arm::Test2;
  throw ConfigError("unknown arm '" + name + "'");
}

const char* arm_name(Arm arm) {
  switch (arm) {
    case Arm::Control:
      return "control";
    case Arm::Test1:
      return "test1";
    case Arm::Test2:
      return "test2";
  }
  return "control";
}

void RandomPolicy::begin_candidate() {
  std::uniform_int_distribution<int> coin(0, 1);
  current_ = coin(rng_) == 1 ? ControllerAction::AdjustUp : ControllerAction::NoAdjustment;
}

ControllerAction RandomPolicy::action(PC, const ControllerState&) { return current_; }

ControllerAction TrainedPolicy::action(PC pc, const ControllerState& state) {
  return act(nets_.at(pc), state);
}

PcTracker::PcTracker(PC pc_in, std::size_t buckets, const SimulationConfig& cfg,
                     std::uint64_t seed)
    : pc(pc_in),
      eligible_counter(buckets,
                       [&] {
                         DPParams p = cfg.dp_eligible;
                         p.batch_size = kManualFlush;
                         return p;
                       }(),
                       derive_seed(seed, 1)),
      eligible_dist(BucketDistribution::undefined(buckets)),
      delivery_dist(BucketDistribution::undefined(buckets)),
      v(buckets, 0.0),
      counts_at_episode_start(buckets, 0.0),
      exact_counts(buckets, 0) {
  if (pc == PC::Gender) {
    DPParams p = cfg.dp_delivery;
    p.batch_size = cfg.sim.episode_k;
    gender_delivery.emplace(buckets, p, derive_seed(seed, 2));
  }
  // The race-side BisgGroupState is attached by the simulator, which knows
  // the ad id and aggregation level.
}

std::vector<double> PcTracker::read_delivery_counts() const {
  if (pc == PC::Gender) return gender_delivery->read_counts();
  return race_delivery->counter().read_counts();
}

Episode PcTracker::complete_flush() {
  const std::vector<double> new_counts = read_delivery_counts();
  Episode e;
  e.pc = pc;
  e.v0 = v;
  e.terminal_reward = compute_terminal_reward(counts_at_episode_start, new_counts, v);
  e.steps = std::move(step_buffer);
  step_buffer.clear();
  counts_at_episode_start = new_counts;
  delivery_dist = delivery_ratio(new_counts);
  double total = 0.0;
  for (double c : new_counts) total += std::max(0.0, c);
  total_impressions = total;
  if (delivery_dist.defined && eligible_dist.defined) {
    for (std::size_t b = 0; b < v.size(); ++b) {
      v[b] = delivery_dist.values[b] - eligible_dist.values[b];
    }
    scalar_variance = shuffle_distance(delivery_dist, eligible_dist);
    variance_defined = true;
  } else {
    std::fill(v.begin(), v.end(), 0.0);
    scalar_variance = 0.0;
    variance_defined = false;
  }
  return e;
}

Simulator::Simulator(const World& world, const SimulationConfig& config,
                     const EmbeddingStore& store, std::uint64_t run_seed, Arm arm,
                     PolicyMode mode, const std::map<PC, RewardNet>* nets,
                     MultiplierCalibration calibration, bool collect_episodes)
    : world_(world),
      config_(config),
      store_(&store),
      arm_(arm),
      mode_(mode),
      logic_(mode == PolicyMode::Random
                 ? config.bid_logic
                 : (arm == Arm::Test2 ? BidLogic::AdjustUpAndDown : BidLogic::AdjustUpOnly)),
      adjust_enabled_(arm != Arm::Control),
      collect_episodes_(collect_episodes),
      calibration_(calibration) {
  // Embeddings must cover every user before the run starts.
  embeddings_.reserve(world_.users.size());
  for (const UserRecord& u : world_.users) {
    const auto it = store.entries.find(u.user_id);
    if (it == store.entries.end()) {
      throw std::runtime_error("Simulator: missing embedding for user " +
                               std::to_string(u.user_id));
    }
    embeddings_.push_back(it->second);
  }

  if (adjust_enabled_ && mode_ == PolicyMode::Trained) {
    if (nets == nullptr) {
      throw ConfigError("Simulator: trained mode requires controller checkpoints");
    }
    const int emb_dim = embeddings_.empty() ? 0 : static_cast<int>(embeddings_.front().size());
    for (PC pc : config_.active_pcs) {
      const auto it = nets->find(pc);
      if (it == nets->end()) {
        throw ConfigError(std::string("Simulator: missing checkpoint for pc ") + pc_name(pc));
      }
      const int signs = pc == PC::Gender ? 1 : static_cast<int>(bucket_count(pc));
      if (it->second.net.input_size() != emb_dim + signs) {
        throw ConfigError(std::string("Simulator: checkpoint/config mismatch for pc ") +
                          pc_name(pc));
      }
    }
    policy_ = std::make_unique<TrainedPolicy>(*nets);
  } else {
    policy_ = std::make_unique<RandomPolicy>(derive_seed(run_seed, seed_stream::kPolicy));
  }

  posterior_cache_.resize(world_.surnames.surnames() * world_.geo.zips());
  posterior_cached_.assign(posterior_cache_.size(), 0);

  trackers_.resize(world_.ads.size());
  per_ad_impressions_.assign(world_.ads.size(), 0);
  for (std::size_t ai = 0; ai < world_.ads.size(); ++ai) {
    if (!world_.ads[ai].is_housing) continue;
    housing_ads_.push_back(static_cast<int>(ai));
    for (std::size_t pci = 0; pci < kNumPcs; ++pci) {
      const PC pc = static_cast<PC>(pci);
      const std::uint64_t seed =
          derive_seed(run_seed, seed_stream::kCounter, ai * 16 + pci * 4);
      auto t = std::make_unique<PcTracker>(pc, bucket_count(pc), config_, seed);
      if (pc == PC::EstimatedRace) {
        t->race_delivery.emplace(world_.ads[ai].ad_id, bucket_count(pc),
                                 config_.sim.bisg_aggregation, config_.dp_delivery,
                                 derive_seed(seed, 3));
      }
      trackers_[ai][pci] = std::move(t);
    }
  }
}

const PcTracker& Simulator::tracker(int ad_index, PC pc) const {
  const auto& t = trackers_.at(static_cast<std::size_t>(ad_index))[static_cast<std::size_t>(pc)];
  if (!t) throw std::out_of_range("tracker: ad is not tracked");
  return *t;
}

const BucketDistribution& Simulator::posterior_for(const UserRecord& u) {
  const std::size_t key = static_cast<std::size_t>(u.surname_id) * world_.geo.zips() +
                          static_cast<std::size_t>(u.zip_id);
  if (!posterior_cached_[key]) {
    posterior_cache_[key] = bisg_posterior(u.surname_id, u.zip_id, world_.surnames, world_.geo);
    posterior_cached_[key] = 1;
  }
  return posterior_cache_[key];
}

void Simulator::refresh_eligible() {
  for (const int ai : housing_ads_) {
    auto& per_pc = trackers_[static_cast<std::size_t>(ai)];
    for (auto& t : per_pc) {
      for (const int ui : world_.audience[static_cast<std::size_t>(ai)]) {
        const UserRecord& u = world_.users[static_cast<std::size_t>(ui)];
        const double w = static_cast<double>(u.activity_weight);
        if (t->pc == PC::Gender) {
          t->eligible_counter.add_event(static_cast<std::size_t>(bucket_of(u, PC::Gender)), w);
        } else {
          // Symmetric measurement: the eligible side of race flows through the
          // same BISG posterior as delivery, never ground truth.
          const BucketDistribution& post = posterior_for(u);
          for (std::size_t b = 0; b < post.buckets(); ++b) {
            t->eligible_counter.add_event(b, post.values[b] * w);
          }
        }
      }
      t->eligible_counter.flush_batch();
      t->eligible_dist = delivery_ratio(t->eligible_counter.read_counts());
    }
  }
}

void Simulator::close_episode(int ad_index, PcTracker& t) {
  Episode e = t.complete_flush();
  if (collect_episodes_ && adjust_enabled_) {
    e.ad_id = world_.ads[static_cast<std::size_t>(ad_index)].ad_id;
    result_.episodes.push_back(std::move(e));
  }
}

void Simulator::record_impression(const RequestEvent& event, int ad_index,
                                  ControllerAction /*executed*/) {
  const UserRecord& u = world_.users[static_cast<std::size_t>(event.user_index)];
  per_ad_impressions_[static_cast<std::size_t>(ad_index)] += 1;
  auto& per_pc = trackers_[static_cast<std::size_t>(ad_index)];
  if (!per_pc[0]) return;  // non-housing ads are not tracked
  for (auto& t : per_pc) {
    t->exact_counts[static_cast<std::size_t>(bucket_of(u, t->pc))] += 1;  // audit only
    bool flushed = false;
    if (t->pc == PC::Gender) {
      const int before = t->gender_delivery->batches_flushed();
      t->gender_delivery->add_event(static_cast<std::size_t>(bucket_of(u, PC::Gender)));
      flushed = t->gender_delivery->batches_flushed() > before;
    } else {
      flushed = t->race_delivery->ingest_impression(u.surname_id, u.zip_id, world_.surnames,
                                                    world_.geo);
    }
    if (flushed) close_episode(ad_index, *t);
  }
}

std::vector<ImpressionEvent> Simulator::run_request(const RequestEvent& event) {
  const UserRecord& user = world_.users[static_cast<std::size_t>(event.user_index)];
  const std::vector<double>& emb = embeddings_[static_cast<std::size_t>(event.user_index)];
  const std::size_t n = event.candidate_ad_indices.size();

  std::vector<double> totals(n, 0.0);
  std::vector<std::int64_t> ad_ids(n, 0);
  std::vector<ControllerAction> executed(n, ControllerAction::NoAdjustment);
  struct PendingPcStep {
    ControllerState state;
    ControllerAction action;
  };
  // Per candidate, per PC slot; only housing candidates under adjustment fill these.
  std::vector<std::array<std::optional<PendingPcStep>, kNumPcs>> pending(n);

  for (std::size_t ci = 0; ci < n; ++ci) {
    const int ad_index = event.candidate_ad_indices[ci];
    const AdRecord& ad = world_.ads[static_cast<std::size_t>(ad_index)];
    AuctionCandidate cand;
    cand.ad_id = ad.ad_id;
    cand.advertiser_bid = ad.advertiser_bid_base;
    cand.quality_bid = world_.quality_bid(user, ad);
    cand.is_housing = ad.is_housing;

    double multiplier = 1.0;
    if (ad.is_housing && adjust_enabled_) {
      auto& per_pc = trackers_[static_cast<std::size_t>(ad_index)];
      policy_->begin_candidate();
      std::vector<VoteInput> votes;
      votes.reserve(config_.active_pcs.size());
      for (PC pc : config_.active_pcs) {
        PcTracker& t = *per_pc[static_cast<std::size_t>(pc)];
        ControllerState state = build_state(emb, t.v, pc);
        const ControllerAction a = policy_->action(pc, state);
        result_.audit.action_counts[static_cast<int>(a)] += 1;
        votes.push_back(VoteInput{pc, a, t.v});
        if (collect_episodes_) {
          pending[ci][static_cast<std::size_t>(pc)] = PendingPcStep{std::move(state), a};
        }
      }
      const ControllerAction final_action = decide(votes, config_.voting);
      executed[ci] = final_action;
      multiplier = apply_action(final_action, calibration_, logic_);
    }
    if (!ad.is_housing && multiplier != 1.0) {
      result_.audit.non_housing_adjusted = true;
    }
    totals[ci] = total_bid(cand, multiplier);
    ad_ids[ci] = ad.ad_id;
  }

  const std::vector<int> winners = run_auction(totals, ad_ids, event.slot_count);
  std::vector<char> impressed(n, 0);
  for (int wi : winners) impressed[static_cast<std::size_t>(wi)] = 1;

  // Steps first (episodes close at the flush the impression triggers, and the
  // closing episode includes this request's steps).
  if (collect_episodes_ && adjust_enabled_) {
    for (std::size_t ci = 0; ci < n; ++ci) {
      for (std::size_t pci = 0; pci < kNumPcs; ++pci) {
        if (!pending[ci][pci]) continue;
        PcTracker& t =
            *trackers_[static_cast<std::size_t>(event.candidate_ad_indices[ci])][pci];
        t.step_buffer.push_back(EpisodeStep{std::move(pending[ci][pci]->state),
                                            pending[ci][pci]->action,
                                            impressed[ci] != 0});
      }
    }
  }

  std::vector<ImpressionEvent> impressions;
  impressions.reserve(winners.size());
  for (int wi : winners) {
    const int ad_index = event.candidate_ad_indices[static_cast<std::size_t>(wi)];
    const AdRecord& ad = world_.ads[static_cast<std::size_t>(ad_index)];
    ImpressionEvent imp;
    imp.ad_id = ad.ad_id;
    imp.user_id = user.user_id;
    imp.timestep = ++timestep_;
    imp.action_taken = executed[static_cast<std::size_t>(wi)];
    imp.clicked = hash_uniform(splitmix64(static_cast<std::uint64_t>(user.user_id) * 131 +
                                          static_cast<std::uint64_t>(ad.ad_id)),
                               0xC11C) < sigmoid(world_.click_logit(user, ad));
    impressions.push_back(imp);
    result_.audit.impressions += 1;
    record_impression(event, ad_index, imp.action_taken);
  }
  result_.audit.requests += 1;
  return impressions;
}

std::vector<VarianceReport> Simulator::current_reports(PC pc) const {
  std::vector<VarianceReport> reports;
  reports.reserve(housing_ads_.size());
  for (const int ai : housing_ads_) {
    const PcTracker& t =
        *trackers_[static_cast<std::size_t>(ai)][static_cast<std::size_t>(pc)];
    VarianceReport r;
    r.ad_id = world_.ads[static_cast<std::size_t>(ai)].ad_id;
    r.pc = pc;
    r.eligible = t.eligible_dist;
    r.delivery = t.delivery_dist;
    r.variance = t.scalar_variance;
    r.variance_defined = t.variance_defined;
    r.total_impressions = t.total_impressions;
    r.is_housing = true;
    reports.push_back(std::move(r));
  }
  return reports;
}

void Simulator::snapshot_day(int day) {
  for (std::size_t pci = 0; pci < kNumPcs; ++pci) {
    const PC pc = static_cast<PC>(pci);
    const auto reports = current_reports(pc);
    DayMetricsRow row;
    row.day = day;
    row.pc = pc;
    row.ncac = ncac(reports, config_.metrics.variance_threshold,
                    config_.metrics.min_impressions);
    row.coverage = coverage(reports, config_.metrics.variance_threshold,
                            config_.metrics.min_impressions);
    double var_sum = 0.0;
    int qualifying = 0;
    for (const auto& r : reports) {
      if (r.total_impressions >= config_.metrics.min_impressions && r.variance_defined) {
        var_sum += r.variance;
        ++qualifying;
      }
    }
    row.qualifying_ads = qualifying;
    row.mean_variance = qualifying > 0 ? var_sum / qualifying : 0.0;
    result_.day_metrics.push_back(std::move(row));
  }
}

SimulatorResult Simulator::run(std::span<const RequestEvent> events) {
  result_ = SimulatorResult{};
  result_.calibration = calibration_;
  timestep_ = 0;
  std::fill(per_ad_impressions_.begin(), per_ad_impressions_.end(), 0L);

  refresh_eligible();  // day 0 baseline before any request
  int day = 0;
  long last_timestep = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (i > 0 && i % static_cast<std::size_t>(config_.sim.requests_per_day) == 0) {
      snapshot_day(day);
      ++day;
      refresh_eligible();
    }
    const auto impressions = run_request(events[i]);
    for (const auto& imp : impressions) {
      if (imp.timestep <= last_timestep) result_.audit.timestep_violations += 1;
      last_timestep = imp.timestep;
    }
  }

  // End of run: flush staged data so nothing is silently dropped. Partial
  // episodes emitted here are shorter than k and fall out in preprocessing.
  for (const int ai : housing_ads_) {
    for (auto& t : trackers_[static_cast<std::size_t>(ai)]) {
      bool flushed = false;
      if (t->pc == PC::Gender) {
        if (t->gender_delivery->staged_total() > 0.0) {
          t->gender_delivery->flush_batch();
          flushed = true;
        }
      } else {
        flushed = t->race_delivery->flush_remaining(world_.surnames, world_.geo);
      }
      if (flushed) close_episode(ai, *t);
    }
  }
  snapshot_day(day);

  // Impression-conservation audit: exact per-bucket counts must sum to the
  // ad's impression count for every PC.
  for (const int ai : housing_ads_) {
    for (const auto& t : trackers_[static_cast<std::size_t>(ai)]) {
      long sum = 0;
      for (long c : t->exact_counts) sum += c;
      if (sum != per_ad_impressions_[static_cast<std::size_t>(ai)]) {
        result_.audit.exact_impressions_per_ad_mismatches += 1;
      }
    }
  }

  for (std::size_t pci = 0; pci < kNumPcs; ++pci) {
    const auto reports = current_reports(static_cast<PC>(pci));
    result_.final_reports.insert(result_.final_reports.end(), reports.begin(), reports.end());
  }
  return std::move(result_);
}

MultiplierCalibration run_calibration_pass(const World& world,
                                           const SimulationConfig& config,
                                           std::uint64_t seed) {
  const bool any_housing = std::any_of(world.ads.begin(), world.ads.end(),
                                       [](const AdRecord& a) { return a.is_housing; });
  if (!any_housing) return MultiplierCalibration{};  // nothing to adjust
  const auto events =
      generate_request_stream(world, config.sim, config.sim.calibration_auctions,
                              derive_seed(seed, seed_stream::kCalibration));
  std::vector<CalibrationAuction> history;
  history.reserve(events.size());
  for (const RequestEvent& ev : events) {
    const UserRecord& user = world.users[static_cast<std::size_t>(ev.user_index)];
    CalibrationAuction auction;
    bool first = true;
    for (const int ad_index : ev.candidate_ad_indices) {
      const AdRecord& ad = world.ads[static_cast<std::size_t>(ad_index)];
      AuctionCandidate cand;
      cand.ad_id = ad.ad_id;
      cand.advertiser_bid = ad.advertiser_bid_base;
      cand.quality_bid = world.quality_bid(user, ad);
      cand.is_housing = ad.is_housing;
      const double bid = total_bid(cand, 1.0);
      if (first) {
        auction.max_total_bid = auction.min_total_bid = bid;
        first = false;
      } else {
        auction.max_total_bid = std::max(auction.max_total_bid, bid);
        auction.min_total_bid = std::min(auction.min_total_bid, bid);
      }
      if (cand.is_housing) auction.housing.push_back(cand);
    }
    history.push_back(std::move(auction));
  }
  return calibrate(history, 20);
}

}  // namespace vrs
