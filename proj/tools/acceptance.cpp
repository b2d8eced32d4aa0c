// Copyright 2026 The semtag Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Acceptance run: one PASS/FAIL line per criterion, exit status 1 on any failure.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oracles.hpp"
#include "semtag/assignment.hpp"
#include "semtag/builder.hpp"
#include "semtag/cluster.hpp"
#include "semtag/decode.hpp"
#include "semtag/freeform.hpp"
#include "semtag/io.hpp"
#include "semtag/metrics.hpp"
#include "semtag/surrogate.hpp"
#include "semtag/trie.hpp"
#include "support.hpp"

using namespace semtag;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void verdict(int n, const std::string& name, bool ok, const std::string& detail) {
    std::printf("criterion %2d %s  %s: %s\n", n, ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

PlantedWorldConfig cube() {
    PlantedWorldConfig wc;
    wc.branching = {4, 4, 4};
    wc.n_items = 2000;
    wc.n_users = 600;
    return wc;
}

BuildConfig cube_build() {
    BuildConfig bc;
    bc.d_max = 3;
    bc.parallelism = 8;
    return bc;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Planted {
    testing::MockSetup mock;
    BuildResult built;
    std::vector<AssignmentRecord> records;
    double seconds = 0.0;

    explicit Planted(PlantedWorldConfig wc) : mock(wc) {}
};

// Coverage: items given a non-empty, unflagged path. Purity: per mined leaf,
// the share of its items that agree with its majority planted leaf.
void criterion_1(const Planted& p) {
    const auto& world = *p.mock.world;
    std::size_t covered = 0, full = 0;
    std::map<std::string, std::map<int, std::size_t>> by_leaf;
    for (const auto& r : p.records) {
        if (r.path.empty() || r.flagged) continue;
        ++covered;
        if (r.path.size() == world.depth()) ++full;
        const auto& item = world.items()[*world.corpus().position(r.item_id)];
        ++by_leaf[r.path.back()][item.leaf];
    }
    std::size_t majority = 0, total = 0;
    for (const auto& [_, counts] : by_leaf) {
        std::size_t best = 0;
        for (const auto& [leaf, c] : counts) {
            best = std::max(best, c);
            total += c;
        }
        majority += best;
    }
    const double coverage = static_cast<double>(covered) / static_cast<double>(p.records.size());
    const double purity = total == 0 ? 0.0 : static_cast<double>(majority) / static_cast<double>(total);
    verdict(1, "planted taxonomy recovery", coverage >= 0.95 && purity >= 0.90 && p.seconds < 60.0,
            fmt("coverage=%.4f (>=0.95) purity=%.4f (>=0.90) time=%.2fs (<60) full_depth=%zu/%zu leaves=%zu",
                coverage, purity, p.seconds, full, p.records.size(), by_leaf.size()));
}

void criterion_2() {
    const auto wc = cube();
    const PlantedWorld probe = PlantedWorld::generate(wc);
    MockBehavior mb;
    mb.withheld = {probe.node(probe.nodes_at_depth(1)[1]).name};
    testing::MockSetup m(wc, mb);
    const BuildResult built = build_vocabulary(m.world->corpus(), cube_build(), *m.gateway, m.provider);
    const RefinementLog* root = nullptr;
    for (const auto& l : built.logs) {
        if (l.node_id == VocabularyTree::kRootId) root = &l;
    }
    bool ok = root && root->cycles.size() >= 2;
    double c1 = 0, c2 = 0, best = 0;
    if (ok) {
        c1 = root->cycles[0].coverage;
        c2 = root->cycles[1].coverage;
        for (std::size_t i = 0; i < root->cycles.size() && i < 3; ++i) best = std::max(best, root->cycles[i].coverage);
        ok = c2 > c1 && best >= 0.95;
    }
    // Deltas are read back from the CSV the report stage writes.
    const fs::path dir = testing::temp_dir("acc_cov");
    write_coverage_csv(coverage_report(built.logs), dir / "coverage_delta.csv");
    std::size_t rows = 0, negative = 0;
    double min_delta = 0.0;
    for_each_line(dir / "coverage_delta.csv", [&](std::string_view line, std::size_t n) {
        if (n == 1) return;
        std::stringstream ss{std::string(line)};
        std::string level, cycle, delta;
        std::getline(ss, level, ',');
        std::getline(ss, cycle, ',');
        std::getline(ss, delta, ',');
        const double d = std::stod(delta);
        min_delta = rows == 0 ? d : std::min(min_delta, d);
        ++rows;
        negative += d < 0.0;
    });
    fs::remove_all(dir);
    ok = ok && rows > 0 && negative == 0;
    verdict(2, "refinement efficacy", ok,
            fmt("withheld='%s' cycle1=%.4f cycle2=%.4f best_within_3=%.4f csv_rows=%zu min_delta=%.4f negative=%zu",
                mb.withheld.begin()->c_str(), c1, c2, best, rows, min_delta, negative));
}

void criterion_3() {
    const auto wc = cube();
    const PlantedWorld probe = PlantedWorld::generate(wc);
    MockBehavior mb;
    mb.withheld = {probe.node(probe.nodes_at_depth(1)[0]).name};
    testing::MockSetup m(wc, mb);
    BuildConfig bc = cube_build();
    bc.branching_factor = 1;
    const fs::path dir = testing::temp_dir("acc_budget");
    BuildOptions bo;
    bo.checkpoint_dir = dir;
    const BuildResult built = build_vocabulary(m.world->corpus(), bc, *m.gateway, m.provider, bo);
    // Sum the per-node call records from the ledger file.
    std::uint64_t annotator = 0, architect = 0, nodes = 0;
    for_each_line(dir / "ledger.jsonl", [&](std::string_view line, std::size_t) {
        const json j = json::parse(line);
        if (j.value("event", "") != "node_committed") return;
        ++nodes;
        const CallLedger l = CallLedger::from_json(j.at("calls"));
        annotator += l.calls(AgentRole::Annotator);
        architect += l.calls(AgentRole::Architect);
    });
    fs::remove_all(dir);
    const std::uint64_t n = wc.n_items;
    const std::uint64_t ann_bound = bc.c_max * n * bc.d_max;
    const std::uint64_t arch_bound = nodes * (1 + bc.c_max);
    const bool consistent = annotator == m.gateway->ledger().calls(AgentRole::Annotator) &&
                            architect == m.gateway->ledger().calls(AgentRole::Architect) &&
                            nodes == built.report.nodes_refined;
    verdict(3, "call budget bound (b=1)", consistent && annotator <= ann_bound && architect <= arch_bound,
            fmt("annotator=%llu <= %llu architect=%llu <= %llu nodes=%llu ledger_consistent=%s",
                (unsigned long long)annotator, (unsigned long long)ann_bound, (unsigned long long)architect,
                (unsigned long long)arch_bound, (unsigned long long)nodes, consistent ? "yes" : "no"));
}

bool bijective(const std::vector<AssignmentRecord>& recs, const VocabularyTree& tree, std::size_t& collided) {
    std::map<std::pair<std::vector<std::string>, std::size_t>, std::string> forward;
    std::set<std::string> items;
    std::map<std::vector<std::string>, std::size_t> group;
    for (const auto& r : recs) {
        if (!forward.emplace(std::make_pair(r.path, r.resolver), r.item_id).second) return false;
        if (!items.insert(r.item_id).second) return false;
        ++group[r.path];
    }
    collided = 0;
    for (const auto& [_, g] : group) collided += g > 1 ? g : 0;
    const SemIdTable table = export_semids(recs, tree);
    const DescriptorTrie trie = DescriptorTrie::build(table);
    for (const auto& row : table.rows) {
        const std::string* back = trie.lookup(row.tokens);
        if (!back || *back != row.item_id) return false;
    }
    return decode_semids(table, tree) == recs;
}

void criterion_4(const Planted& p) {
    bool ok = true;
    std::size_t min_collided = SIZE_MAX, corpora = 0;
    for (std::uint64_t seed = 1; seed <= 20 && ok; ++seed) {
        const auto c = testing::random_catalog(seed, 1000 + 100 * seed, 3, 3);
        std::size_t collided = 0;
        ok = bijective(c.records, c.tree, collided) && collided > 0;
        min_collided = std::min(min_collided, collided);
        ++corpora;
    }
    std::size_t planted_collided = 0;
    const auto resolved = resolve_collisions(p.records);
    ok = ok && bijective(resolved, p.built.tree, planted_collided) && planted_collided > 0;
    verdict(4, "collision bijection", ok,
            fmt("random_corpora=%zu (1000..3000 items, min collided items=%zu) planted=%zu items (%zu collided)",
                corpora, min_collided, resolved.size(), planted_collided));
}

void criterion_5() {
    std::size_t corpora = 0, rankings = 0, mismatches = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        Rng rng(seed * 31);
        const std::size_t n = 10 + rng.below(191);
        const auto c = testing::random_catalog(500 + seed, n, 3, 3, 0.2, 30);
        const SurrogateModel m = fit_surrogate(c.split, c.table, 2 + seed % 3, 0.05 * static_cast<double>(seed % 4));
        const DescriptorTrie trie = DescriptorTrie::build(c.table);
        ++corpora;
        for (const auto& [user, train] : c.split.train) {
            const auto prefix = encode_stream(c.table, train, true);
            const auto beam = beam_decode(m, prefix, trie, n + seed % 3);
            const auto exact = testing::brute_rank(m, prefix, trie);
            ++rankings;
            if (beam.size() != exact.size()) {
                ++mismatches;
                continue;
            }
            for (std::size_t i = 0; i < beam.size(); ++i) {
                const double d = beam[i].score == exact[i].score ? 0.0 : std::abs(beam[i].score - exact[i].score);
                worst = std::max(worst, d);
                if (beam[i].item_id != exact[i].item_id || !(d <= 1e-12)) {
                    ++mismatches;
                    break;
                }
            }
        }
    }
    verdict(5, "decoder oracle equivalence", mismatches == 0,
            fmt("corpora=%zu (10..200 items) rankings=%zu mismatches=%zu max_score_diff=%.3g", corpora, rankings,
                mismatches, worst));
}

void criterion_6(const Planted& p) {
    const auto& world = *p.mock.world;
    const auto resolved = resolve_collisions(p.records);
    const SemIdTable table = export_semids(resolved, p.built.tree);
    const DescriptorTrie trie = DescriptorTrie::build(table);
    const SplitDataset split = last_out_split(world.interactions());
    const SurrogateModel model = fit_surrogate(split, table);
    const CritiqueSimulator sim(p.built.tree, table, world.corpus(), {});
    const CritiqueReport rep = evaluate_critique(model, table, trie, split, sim, 20);
    const double v = rep.vanilla.ndcg_at(10), c = rep.constrained.ndcg_at(10);
    const bool ok = rep.constrained.n_users >= 500 && c >= v && rep.n_violations == 0 && rep.n_no_level1 == 0 &&
                    rep.n_outputs > 0;
    verdict(6, "critique direction", ok,
            fmt("users=%zu vanilla_N@10=%.4f constrained_N@10=%.4f outputs=%zu violations=%zu", rep.constrained.n_users,
                v, c, rep.n_outputs, rep.n_violations));
}

void criterion_7() {
    std::size_t medoid_ok = 0, means_ok = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed * 104729 + 3);
        const std::size_t n = 2 + rng.below(7);
        const std::size_t k = 1 + rng.below(std::min<std::size_t>(3, n));
        const Matrix pts = testing::random_points(rng, n, 2);
        const double got = k_medoids(pts, k, seed).total_cost;
        const double want = testing::brute_kmedoids(pts, k);
        const double d = std::abs(got - want);
        worst = std::max(worst, d);
        medoid_ok += d <= 1e-12 * std::max(1.0, want);
    }
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed + 7000);
        const std::size_t k = 2 + rng.below(2);
        const Matrix pts = testing::blobs(rng, k, 3, 2);
        const double got = k_means(pts, k, seed).total_cost;
        const double want = testing::brute_kmeans(pts, k);
        means_ok += std::abs(got - want) <= 1e-9 * std::max(1.0, want);
    }
    verdict(7, "clustering oracles", medoid_ok == 100 && means_ok == 30,
            fmt("k_medoids exact=%zu/100 (max diff %.2g) k_means optimal=%zu/30", medoid_ok, worst, means_ok));
}

void criterion_8() {
    const std::vector<std::string> r{"a", "b", "t", "c", "d"};
    const double nd = ndcg_at_k(r, "t", 5);
    bool closed = std::abs(nd - 0.5) < 1e-15 && recall_at_k(r, "t", 3) == 1.0 && recall_at_k(r, "t", 2) == 0.0 &&
                  ndcg_at_k(r, "a", 5) == 1.0 && ndcg_at_k(r, "t", 2) == 0.0;
    std::vector<std::string> catalog;
    for (int i = 0; i < 1000; ++i) catalog.push_back("c" + std::to_string(i));
    SplitDataset split;
    Rng rng(2024);
    for (int u = 0; u < 2000; ++u) {
        const std::string user = "u" + std::to_string(u);
        for (int h = 0; h < 4; ++h) split.train[user].push_back(catalog[rng.below(1000)]);
        split.valid[user] = catalog[rng.below(1000)];
        split.test[user] = catalog[rng.below(1000)];
    }
    EvalOptions eo;
    eo.mode = EvalMode::Sampled;
    eo.seed = 17;
    const MetricReport rep = evaluate_run(RandomRecommender(catalog, 99), split, catalog, eo);
    const double p = 10.0 / 101.0;
    const double sigma = std::sqrt(p * (1 - p) / 2000.0);
    const double got = rep.recall_at(10);
    verdict(8, "metric correctness", closed && rep.n_users == 2000 && std::abs(got - p) <= 3 * sigma,
            fmt("NDCG@5(rank 3)=%.6f closed_form=%s sampled R@10=%.4f expected=%.4f 3sigma=%.4f users=%zu", nd,
                closed ? "ok" : "bad", got, p, 3 * sigma, rep.n_users));
}

void criterion_9(Planted& p) {
    const VocabStats stats = vocab_stats(p.records, p.built.tree);
    const FreeformTagTable tags = generate_freeform(p.mock.world->corpus(), *p.mock.gateway);
    std::map<std::string, std::size_t> freq;
    for (const auto& [_, ts] : tags.tags) {
        for (const auto& t : ts) ++freq[t];
    }
    const double free_util = utilization(freq);
    verdict(9, "utilization contrast", stats.utilization == 1.0 && free_util < 0.5,
            fmt("pipeline=%.4f (n_used=%zu) freeform=%.4f (distinct tags=%zu)", stats.utilization, stats.n_used,
                free_util, freq.size()));
}

int run(const std::string& cmd) {
    const int st = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : 128 + WTERMSIG(st);
}

void criterion_10(const std::string& cli) {
    const fs::path dir = testing::temp_dir("acc_resume");
    const std::string base = "cd '" + dir.string() + "' && '" + cli + "' ";
    bool ok = run(base + "--run-dir unused plant --out data --branching 4 4 4 --items 2000 --users 100") == 0;
    const std::string cfg = "--config data/config.json ";
    ok = ok && run(base + cfg + "--run-dir whole ingest") == 0 && run(base + cfg + "--run-dir whole build-vocab") == 0;
    ok = ok && run(base + cfg + "--run-dir cut ingest") == 0;
    const int killed = run(base + cfg + "--run-dir cut --kill-after-nodes 7 build-vocab");
    std::size_t before = 0, after = 0;
    auto commits = [&] {
        std::size_t n = 0;
        for_each_line(dir / "cut" / "ledger.jsonl", [&](std::string_view line, std::size_t) {
            n += line.find("\"node_committed\"") != std::string_view::npos;
        });
        return n;
    };
    if (fs::exists(dir / "cut" / "ledger.jsonl")) before = commits();
    const int resumed = run(base + cfg + "--run-dir cut resume");
    if (fs::exists(dir / "cut" / "ledger.jsonl")) after = commits();
    const auto dups = duplicate_commits(dir / "cut" / "ledger.jsonl");
    const bool same = ok && read_file(dir / "whole" / "vocab.json") == read_file(dir / "cut" / "vocab.json");
    ok = ok && killed == 137 && before == 7 && resumed == 0 && dups.empty() && same && after > before;
    verdict(10, "resumability", ok,
            fmt("kill_status=%d commits_before=%zu commits_after=%zu duplicates=%zu vocab_identical=%s", killed, before,
                after, dups.size(), same ? "yes" : "no"));
    fs::remove_all(dir);
}

}  // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : SEMTAG_CLI_PATH;
    try {
        Planted p(cube());
        const auto t0 = std::chrono::steady_clock::now();
        p.built = build_vocabulary(p.mock.world->corpus(), cube_build(), *p.mock.gateway, p.mock.provider);
        p.records = assign_paths(p.mock.world->corpus(), p.built.tree, *p.mock.gateway);
        p.seconds = seconds_since(t0);

        criterion_1(p);
        criterion_2();
        criterion_3();
        criterion_4(p);
        criterion_5();
        criterion_6(p);
        criterion_7();
        criterion_8();
        criterion_9(p);
        criterion_10(cli);
    } catch (const Error& e) {
        std::printf("aborted: error code=%s message=%s\n", std::string(code_name(e.code())).c_str(), e.what());
        return 2;
    }
    std::printf("%s: %d of 10 criteria failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
    return failures == 0 ? 0 : 1;
}
