#include "commands.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <yaml-cpp/exceptions.h>

namespace sagin::cli {

namespace {

using csv::format;

trico::CostModel checked_model(const Config& cfg) {
    trico::CostModel model(cfg.scenario);
    const auto ch = cfg.scenario.reference_channels();
    for (std::size_t d = 0; d < model.devices(); ++d)
        if (!(net::shannon_rate(ch[d]) > 0.0))
            throw Infeasible("device '" + cfg.scenario.devices[d].id + "' has a zero-rate link");
    return model;
}

std::string decision_names(const trico::CostModel& model, const trico::PartitionDecision& d) {
    std::string s;
    for (std::size_t i = 0; i < d.cuts.size(); ++i) {
        if (i) s += ";";
        s += model.scenario().profile.candidate_name(d.cuts[i]);
    }
    return s;
}

void write_file(const std::filesystem::path& p, const std::string& data) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw InvalidArgument("cannot write '" + p.string() + "'");
    f.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!f) throw InvalidArgument("failed writing '" + p.string() + "'");
}

} // namespace

std::string cmd_profile(const Config& cfg) {
    const auto& p = cfg.scenario.profile;
    std::string out = "candidate,cut_name,layer_index,device_flops,server_flops,intermediate_bytes\n";
    for (std::size_t c = 0; c < p.candidate_count(); ++c) {
        const nn::PartitionPoint cut{c};
        out += std::to_string(c) + "," + p.candidate_name(cut) + "," + std::to_string(p.partition_candidates[c]) + "," +
               std::to_string(nn::device_flops(p, cut)) + "," + std::to_string(nn::server_flops(p, cut)) + "," +
               std::to_string(nn::intermediate_bytes(p, cut)) + "\n";
    }
    return out;
}

std::string cmd_cost(const Config& cfg) {
    const auto model = checked_model(cfg);
    const auto ch = cfg.scenario.reference_channels();
    std::string out = std::string(trico::cost_csv_header) + "\n";
    for (std::size_t d = 0; d < model.devices(); ++d)
        for (std::size_t c = 0; c < model.candidates(); ++c)
            out += trico::cost_csv_row(cfg.scenario.devices[d].id, cfg.scenario.profile.candidate_name({c}),
                                       model.breakdown(d, c, ch[d])) + "\n";
    return out;
}

std::string cmd_oracle(const Config& cfg) {
    const auto model = checked_model(cfg);
    const auto best = trico::brute_force_optimal(model);
    return "decision_id," + std::to_string(trico::encode_decision(best.decision, model.candidates())) + "\n" +
           "decision," + decision_names(model, best.decision) + "\n" + "effect," + format(best.effect) + "\n" +
           "evaluated," + std::to_string(best.evaluated) + "\n";
}

OptimizeReport cmd_optimize(const Config& cfg) {
    const auto& o = cfg.optimizer;
    const rl::Environment env(checked_model(cfg), o.env);
    const auto result = rl::train(o.agent, env, o.steps, o.hyper, o.seed);
    const auto oracle = trico::brute_force_optimal(env.model());
    const auto action = rl::greedy_action(env, result.policy);
    const double effect = env.reference_effect(action);
    const auto decision = trico::decode_decision(action, env.model().candidates(), env.devices());
    auto rel = [&](double v) { return oracle.effect > 0.0 ? (v - oracle.effect) / oracle.effect : v - oracle.effect; };

    OptimizeReport r;
    r.trace_csv = result.trace.to_csv();
    r.summary = "agent," + o.agent + "\n" + "seed," + std::to_string(o.seed) + "\n" + "steps," +
                std::to_string(o.steps) + "\n" + "trained," + (result.policy.trained ? "1" : "0") + "\n" +
                "decision," + decision_names(env.model(), decision) + "\n" + "effect," + format(effect) + "\n" +
                "oracle_decision," + decision_names(env.model(), oracle.decision) + "\n" + "oracle_effect," +
                format(oracle.effect) + "\n" + "gap," + format(rel(effect)) + "\n";
    if (!result.trace.empty()) {
        const double avg = result.trace.back().moving_avg;
        r.summary += "final_moving_avg," + format(avg) + "\n" + "moving_avg_gap," + format(rel(avg)) + "\n";
    }
    return r;
}

std::string cmd_retrieval_sim(const Config& cfg, std::size_t jobs) {
    const auto& rc = cfg.retrieval;
    constexpr std::size_t max_images = 4;
    auto synth = rc.synth;
    synth.uav_images = synth.ground_images = max_images;
    // per_seed[s][cell]
    std::vector<std::vector<retrieval::RetrievalMetrics>> per_seed(rc.seeds);
    auto work = [&](std::size_t s) {
        const auto data = retrieval::synth_gallery(synth, rc.seed + s);
        for (std::size_t u = 1; u <= max_images; ++u)
            for (std::size_t g = 1; g <= max_images; ++g)
                per_seed[s].push_back(retrieval::evaluate_queries(data, u, g, rc.fusion));
    };
    jobs = std::max<std::size_t>(1, std::min(jobs, rc.seeds));
    if (jobs == 1) {
        for (std::size_t s = 0; s < rc.seeds; ++s) work(s);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(jobs);
        for (std::size_t j = 0; j < jobs; ++j)
            pool.emplace_back([&, j] {
                try {
                    for (std::size_t s = j; s < rc.seeds; s += jobs) work(s);
                } catch (...) {
                    errors[j] = std::current_exception();
                }
            });
        for (auto& t : pool) t.join();
        for (const auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    std::string out = "uav_images,ground_images,recall1,recall5,recall10,recall_top1pct,ap\n";
    const double n = static_cast<double>(rc.seeds);
    std::size_t cell = 0;
    for (std::size_t u = 1; u <= max_images; ++u)
        for (std::size_t g = 1; g <= max_images; ++g, ++cell) {
            retrieval::RetrievalMetrics m;
            for (std::size_t s = 0; s < rc.seeds; ++s) {
                const auto& x = per_seed[s][cell];
                m.recall1 += x.recall1;
                m.recall5 += x.recall5;
                m.recall10 += x.recall10;
                m.recall_top1pct += x.recall_top1pct;
                m.ap += x.ap;
            }
            out += std::to_string(u) + "," + std::to_string(g) + "," + format(m.recall1 / n) + "," +
                   format(m.recall5 / n) + "," + format(m.recall10 / n) + "," + format(m.recall_top1pct / n) + "," +
                   format(m.ap / n) + "\n";
        }
    return out;
}

std::string cmd_privacy(const Config& cfg, const std::filesystem::path& corpus) {
    return trico::write_conf_csv(privacy::build_conf_table(privacy::load_corpus(corpus), cfg.privacy.options));
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Split-inference partition cost model, optimizer and metric tools"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path, out_path;
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
    app.add_option("--config", config_path, "Scenario config (YAML)");
    app.add_option("--seed", seed, "Seed overriding the config");
    app.add_option("--out", out_path, "Output file (default: standard output)");
    app.add_option("--jobs", jobs, "Worker threads for independent seeds")->check(CLI::PositiveNumber);

    auto* profile = app.add_subcommand("profile", "Per-candidate FLOPs and intermediate bytes");
    auto* cost = app.add_subcommand("cost", "Tri-Co cost breakdown per device and candidate");
    auto* optimize = app.add_subcommand("optimize", "Train the configured agent; trace to --out, summary to stdout");
    auto* oracle = app.add_subcommand("oracle", "Exhaustive optimum at the reference channels");
    auto* retrieval_sim = app.add_subcommand("retrieval-sim", "Synthetic retrieval metrics per query composition");
    auto* privacy = app.add_subcommand("privacy", "Confidentiality table from a reconstruction corpus");
    std::string corpus_arg;
    privacy->add_option("corpus", corpus_arg, "Corpus directory (default: privacy.corpus from the config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return exit_input;
    }

    try {
        Config cfg = config_path.empty() ? default_config() : load_config(config_path);
        if (seed) {
            cfg.optimizer.seed = *seed;
            cfg.retrieval.seed = *seed;
        }
        auto emit = [&](const std::string& report) {
            if (out_path.empty()) out << report;
            else write_file(out_path, report);
        };
        if (profile->parsed()) {
            emit(cmd_profile(cfg));
        } else if (cost->parsed()) {
            emit(cmd_cost(cfg));
        } else if (oracle->parsed()) {
            emit(cmd_oracle(cfg));
        } else if (optimize->parsed()) {
            const auto r = cmd_optimize(cfg);
            if (!out_path.empty()) write_file(out_path, r.trace_csv);
            out << r.summary;
        } else if (retrieval_sim->parsed()) {
            emit(cmd_retrieval_sim(cfg, jobs));
        } else if (privacy->parsed()) {
            std::filesystem::path corpus = corpus_arg;
            if (corpus.empty()) {
                if (!cfg.privacy.corpus) throw InvalidArgument("privacy: no corpus directory given");
                corpus = *cfg.privacy.corpus;
            }
            emit(cmd_privacy(cfg, corpus));
        }
        return exit_ok;
    } catch (const Infeasible& e) {
        err << "error: infeasible: " << e.what() << "\n";
        return exit_infeasible;
    } catch (const ZeroRate& e) {
        err << "error: infeasible: " << e.what() << "\n";
        return exit_infeasible;
    } catch (const EmptyCut& e) {
        err << "error: EmptyCut: " << e.what() << "\n";
        return exit_input;
    } catch (const YAML::Exception& e) {
        err << "error: config: " << e.what() << "\n";
        return exit_input;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_input;
    }
}

} // namespace sagin::cli
