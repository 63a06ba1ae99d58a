// SPDX-License-Identifier: Apache-2.0
#include "dynmm/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "dynmm/common.hpp"

namespace dynmm {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& key, const std::string& s) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        check(pos == s.size(), Errc::validation, "config: trailing junk in value for '" + key + "'");
        check(std::isfinite(v), Errc::validation, "config: non-finite value for '" + key + "'");
        return v;
    } catch (const Error&) {
        throw;
    } catch (...) {
        fail(Errc::validation, "config: cannot parse value '" + s + "' for '" + key + "'");
    }
}

std::uint64_t parse_uint(const std::string& key, const std::string& s) {
    try {
        std::size_t pos = 0;
        unsigned long long v = std::stoull(s, &pos);
        check(pos == s.size(), Errc::validation, "config: trailing junk in value for '" + key + "'");
        return v;
    } catch (const Error&) {
        throw;
    } catch (...) {
        fail(Errc::validation, "config: cannot parse value '" + s + "' for '" + key + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1" || s == "on") return true;
    if (s == "false" || s == "0" || s == "off") return false;
    fail(Errc::validation, "config: cannot parse boolean '" + s + "' for '" + key + "'");
}

struct Field {
    std::string name;
    std::function<std::string(const ModelConfig&)> get;
    std::function<void(ModelConfig&, const std::string&)> set;
};

template <typename T>
Field uint_field(const std::string& name, T ModelConfig::* member) {
    return {name,
            [member](const ModelConfig& c) { return std::to_string(c.*member); },
            [member, name](ModelConfig& c, const std::string& v) {
                c.*member = static_cast<T>(parse_uint(name, v));
            }};
}

Field dbl_field(const std::string& name, double ModelConfig::* member) {
    return {name,
            [member](const ModelConfig& c) { return fmt_double(c.*member); },
            [member, name](ModelConfig& c, const std::string& v) { c.*member = parse_double(name, v); }};
}

Field dbl_field_w(const std::string& name, double LossWeights::* member) {
    return {name,
            [member](const ModelConfig& c) { return fmt_double(c.w.*member); },
            [member, name](ModelConfig& c, const std::string& v) { c.w.*member = parse_double(name, v); }};
}

Field bool_field(const std::string& name, bool ModelConfig::* member) {
    return {name,
            [member](const ModelConfig& c) { return (c.*member) ? std::string("true") : std::string("false"); },
            [member, name](ModelConfig& c, const std::string& v) { c.*member = parse_bool(name, v); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        uint_field("d", &ModelConfig::d),
        uint_field("d_s", &ModelConfig::d_s),
        uint_field("d_t", &ModelConfig::d_t),
        uint_field("d_vis", &ModelConfig::d_vis),
        uint_field("d_aud", &ModelConfig::d_aud),
        uint_field("d_ell", &ModelConfig::d_ell),
        uint_field("E", &ModelConfig::E),
        uint_field("L", &ModelConfig::L),
        uint_field("C", &ModelConfig::C),
        uint_field("k", &ModelConfig::k),
        uint_field("window", &ModelConfig::window),
        Field{"window_mode",
              [](const ModelConfig& c) {
                  return c.window_mode == WindowMode::events ? std::string("events") : std::string("seconds");
              },
              [](ModelConfig& c, const std::string& v) {
                  if (v == "events")
                      c.window_mode = WindowMode::events;
                  else if (v == "seconds")
                      c.window_mode = WindowMode::seconds;
                  else
                      fail(Errc::validation, "config: window_mode must be 'events' or 'seconds'");
              }},
        uint_field("replay_capacity", &ModelConfig::replay_capacity),
        dbl_field("ema_decay", &ModelConfig::ema_decay),
        dbl_field("lr_adapter", &ModelConfig::lr_adapter),
        dbl_field("lr_proj", &ModelConfig::lr_proj),
        uint_field("batch", &ModelConfig::batch),
        uint_field("seed", &ModelConfig::seed),
        dbl_field_w("lambda_m", &LossWeights::lambda_m),
        dbl_field_w("lambda_r", &LossWeights::lambda_r),
        dbl_field_w("lambda_s", &LossWeights::lambda_s),
        dbl_field_w("lambda_ewc", &LossWeights::lambda_ewc),
        dbl_field_w("lambda_e", &LossWeights::lambda_e),
        dbl_field_w("lambda_f", &LossWeights::lambda_f),
        dbl_field_w("sigma_sq", &LossWeights::sigma_sq),
        dbl_field_w("delta", &LossWeights::delta),
        dbl_field("tau", &ModelConfig::tau),
        uint_field("m_attr", &ModelConfig::m_attr),
        uint_field("adapter_hidden", &ModelConfig::adapter_hidden),
        uint_field("train_negatives", &ModelConfig::train_negatives),
        uint_field("eval_negatives", &ModelConfig::eval_negatives),
        uint_field("pretrain_epochs", &ModelConfig::pretrain_epochs),
        uint_field("fusion_epochs", &ModelConfig::fusion_epochs),
        uint_field("prompt_epochs", &ModelConfig::prompt_epochs),
        uint_field("online_passes", &ModelConfig::online_passes),
        bool_field("include_audio_pairs", &ModelConfig::include_audio_pairs),
        bool_field("faith_prose_mode", &ModelConfig::faith_prose_mode),
        bool_field("serve_ema", &ModelConfig::serve_ema),
        bool_field("separate_user_adapter", &ModelConfig::separate_user_adapter),
        bool_field("full_catalog_eval", &ModelConfig::full_catalog_eval),
        bool_field("adapter_enabled", &ModelConfig::adapter_enabled),
        bool_field("use_txt", &ModelConfig::use_txt),
        bool_field("use_vis", &ModelConfig::use_vis),
        bool_field("use_aud", &ModelConfig::use_aud),
        dbl_field("adam_beta1", &ModelConfig::adam_beta1),
        dbl_field("adam_beta2", &ModelConfig::adam_beta2),
        dbl_field("adam_eps", &ModelConfig::adam_eps),
        dbl_field("weight_decay", &ModelConfig::weight_decay),
        uint_field("pq_m", &ModelConfig::pq_m),
        uint_field("pq_k", &ModelConfig::pq_k),
        uint_field("pq_iters", &ModelConfig::pq_iters),
    };
    return f;
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace

void ModelConfig::validate() const {
    check(d > 0 && d_t > 0 && d_vis > 0 && d_aud > 0 && d_ell > 0, Errc::validation,
          "config: all dims must be positive");
    // The summary schema is fixed at 8 lanes; see adapter module.
    check(d_s == 8, Errc::validation, "config: d_s must be 8 (fixed summary schema)");
    check(E >= 1 && E <= 32, Errc::validation, "config: E must be in [1, 32]");
    check(L >= 1, Errc::validation, "config: L must be positive");
    check(C >= 1, Errc::validation, "config: C must be positive");
    check(k >= 1, Errc::validation, "config: k must be positive");
    check(window >= 1, Errc::validation, "config: window must be positive");
    check(ema_decay >= 0.0 && ema_decay < 1.0, Errc::validation, "config: ema_decay must be in [0, 1)");
    check(w.sigma_sq > 0.0, Errc::validation, "config: sigma_sq must be positive");
    check(tau > 0.0, Errc::validation, "config: tau must be positive");
    check(batch >= 1, Errc::validation, "config: batch must be positive");
    check(pq_m >= 1 && pq_k >= 1, Errc::validation, "config: pq_m and pq_k must be positive");
    const double lambdas[] = {w.lambda_m, w.lambda_r, w.lambda_s, w.lambda_ewc, w.lambda_e, w.lambda_f};
    for (double l : lambdas)
        check(l >= 0.0 && std::isfinite(l), Errc::validation, "config: loss weights must be finite and >= 0");
}

std::string ModelConfig::to_text() const {
    std::ostringstream os;
    for (const auto& f : fields()) os << f.name << " = " << f.get(*this) << "\n";
    return os.str();
}

void ModelConfig::set(const std::string& key, const std::string& value) {
    for (const auto& f : fields()) {
        if (f.name == key) {
            f.set(*this, value);
            return;
        }
    }
    fail(Errc::validation, "config: unknown key '" + key + "'");
}

ModelConfig ModelConfig::from_text(const std::string& text) {
    ModelConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        check(eq != std::string::npos, Errc::validation,
              "config: line " + std::to_string(lineno) + ": expected key = value");
        cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

ModelConfig ModelConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    check(in.good(), Errc::io, "config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
}

void ModelConfig::apply_env(const std::string& prefix) {
    for (const auto& f : fields()) {
        std::string name = prefix;
        for (char c : f.name) name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        if (const char* v = std::getenv(name.c_str())) f.set(*this, v);
    }
    validate();
}

}  // namespace dynmm
