/*
 Copyright 2026 The symlqr Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "symlqr/io.hpp"

#include "json.hpp"

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace symlqr::io {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& what) { throw LqrError(ErrorCode::InvalidArgument, what); }

json parse(std::string_view text) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::exception& e) {
        bad(std::string("malformed JSON: ") + e.what());
    }
}

double number(const json& j, const std::string& ctx) {
    if (!j.is_number()) bad(ctx + ": expected a number");
    return j.get<double>();
}

Index integer(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer()) bad(std::string("missing integer field \"") + key + "\"");
    return j[key].get<Index>();
}

Vector to_vector(const json& j, const std::string& ctx) {
    if (!j.is_array()) bad(ctx + ": expected an array");
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = number(j[i], ctx);
    return v;
}

Matrix to_matrix(const json& j, const std::string& ctx) {
    if (!j.is_array()) bad(ctx + ": expected an array of rows");
    const auto rows = static_cast<Index>(j.size());
    const Index cols = rows ? static_cast<Index>(j[0].size()) : 0;
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Index>(row.size()) != cols) bad(ctx + ": ragged rows");
        for (Index k = 0; k < cols; ++k) M(i, k) = number(row[static_cast<std::size_t>(k)], ctx);
    }
    return M;
}

json from_vector(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json from_matrix(const Matrix& M) {
    json rows = json::array();
    for (Index i = 0; i < M.rows(); ++i) rows.push_back(from_vector(M.row(i).transpose()));
    return rows;
}

json from_sequence(const std::vector<Vector>& s) {
    json out = json::array();
    for (const auto& v : s) out.push_back(from_vector(v));
    return out;
}

json from_matrices(const std::vector<Matrix>& s) {
    json out = json::array();
    for (const auto& M : s) out.push_back(from_matrix(M));
    return out;
}

// A {"key": payload} object with exactly one recognised key.
std::pair<std::string, const json*> tagged(const json& j, const std::string& ctx,
                                           std::initializer_list<const char*> keys) {
    if (!j.is_object() || j.size() != 1) bad(ctx + ": expected an object with one form key");
    for (const char* k : keys)
        if (j.contains(k)) return {k, &j[k]};
    bad(ctx + ": unknown form \"" + j.begin().key() + "\"");
}

std::string base64_encode(const std::vector<unsigned char>& bytes) {
    using namespace boost::archive::iterators;
    using It = base64_from_binary<transform_width<const unsigned char*, 6, 8>>;
    std::string out(It(bytes.data()), It(bytes.data() + bytes.size()));
    out.append((3 - bytes.size() % 3) % 3, '=');
    return out;
}

std::vector<unsigned char> base64_decode(std::string s) {
    using namespace boost::archive::iterators;
    using It = transform_width<binary_from_base64<std::string::const_iterator>, 8, 6>;
    const std::size_t pad = s.size() - s.find_last_not_of('=') - 1;
    if (s.size() % 4 != 0 || pad > 2) bad("base64 payload has bad length or padding");
    std::replace(s.end() - static_cast<std::ptrdiff_t>(pad), s.end(), '=', 'A');
    try {
        std::vector<unsigned char> out(It(s.cbegin()), It(s.cend()));
        out.resize(out.size() - pad);
        return out;
    } catch (const std::exception&) {
        bad("base64 payload has invalid characters");
    }
}

std::vector<unsigned char> to_le_bytes(const double* p, Index n) {
    std::vector<unsigned char> b(static_cast<std::size_t>(n) * 8);
    std::memcpy(b.data(), p, b.size());
    if constexpr (std::endian::native == std::endian::big)
        for (std::size_t i = 0; i < b.size(); i += 8) std::reverse(b.begin() + long(i), b.begin() + long(i) + 8);
    return b;
}

void from_le_bytes(std::vector<unsigned char> b, double* p) {
    if constexpr (std::endian::native == std::endian::big)
        for (std::size_t i = 0; i < b.size(); i += 8) std::reverse(b.begin() + long(i), b.begin() + long(i) + 8);
    std::memcpy(p, b.data(), b.size());
}

}  // namespace

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) bad("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) bad("cannot write " + path);
}

LqrProblem parse_problem(std::string_view text) {
    const json j = parse(text);
    if (!j.is_object()) bad("problem must be a JSON object");
    LqrProblem p;
    p.n = integer(j, "n");
    p.m = integer(j, "m");
    const Index T = integer(j, "T");
    if (!j.contains("h0")) bad("missing field \"h0\"");
    p.h0 = to_vector(j["h0"], "h0");
    if (!j.contains("steps") || !j["steps"].is_array()) bad("missing array \"steps\"");
    if (static_cast<Index>(j["steps"].size()) != T) bad("T does not match the number of steps");
    Index t = 0;
    for (const json& js : j["steps"]) {
        const std::string ctx = "step " + std::to_string(++t);
        if (!js.is_object()) bad(ctx + ": expected an object");
        for (const char* k : {"A", "B", "Q", "R"})
            if (!js.contains(k)) bad(ctx + ": missing \"" + k + "\"");
        StepParams s;
        auto [af, ap] = tagged(js["A"], ctx + " A", {"dense", "diag"});
        if (af == "dense") {
            s.A = to_matrix(*ap, ctx + " A");
        } else {
            s.a_form = AForm::Diagonal;
            s.a_diag = to_vector(*ap, ctx + " A");
        }
        s.B = to_matrix(js["B"], ctx + " B");
        s.Q = to_matrix(js["Q"], ctx + " Q");
        auto [rf, rp] = tagged(js["R"], ctx + " R", {"dense", "diag", "diag_inverse"});
        if (rf == "dense") {
            s.R = to_matrix(*rp, ctx + " R");
        } else {
            s.r_form = rf == "diag" ? RForm::Diagonal : RForm::DiagonalInverse;
            s.r_diag = to_vector(*rp, ctx + " R");
        }
        if (js.contains("r") && !js["r"].is_null()) s.affine = to_vector(js["r"], ctx + " r");
        p.steps.push_back(std::move(s));
    }
    return p;
}

std::string problem_json(const LqrProblem& p) {
    json j{{"n", p.n}, {"m", p.m}, {"T", p.horizon()}, {"h0", from_vector(p.h0)}};
    json steps = json::array();
    for (const auto& s : p.steps) {
        json js;
        js["A"] = s.a_form == AForm::Dense ? json{{"dense", from_matrix(s.A)}} : json{{"diag", from_vector(s.a_diag)}};
        js["B"] = from_matrix(s.B);
        js["Q"] = from_matrix(s.Q);
        switch (s.r_form) {
            case RForm::Dense: js["R"] = {{"dense", from_matrix(s.R)}}; break;
            case RForm::Diagonal: js["R"] = {{"diag", from_vector(s.r_diag)}}; break;
            case RForm::DiagonalInverse: js["R"] = {{"diag_inverse", from_vector(s.r_diag)}}; break;
        }
        js["r"] = s.affine ? from_vector(*s.affine) : json(nullptr);
        steps.push_back(std::move(js));
    }
    j["steps"] = std::move(steps);
    return j.dump();
}

std::string trajectory_json(const LqrTrajectory& traj) {
    json j{{"h", from_sequence(traj.h)},
           {"u", from_sequence(traj.u)},
           {"lambda", from_sequence(traj.lambda)},
           {"cost", traj.cost}};
    return j.dump();
}

LqrTrajectory parse_trajectory(std::string_view text) {
    const json j = parse(text);
    LqrTrajectory t;
    for (const char* k : {"h", "u", "lambda"})
        if (!j.contains(k) || !j[k].is_array()) bad(std::string("missing array \"") + k + "\"");
    for (const auto& v : j["h"]) t.h.push_back(to_vector(v, "h"));
    for (const auto& v : j["u"]) t.u.push_back(to_vector(v, "u"));
    for (const auto& v : j["lambda"]) t.lambda.push_back(to_vector(v, "lambda"));
    if (!j.contains("cost")) bad("missing field \"cost\"");
    t.cost = number(j["cost"], "cost");
    return t;
}

Vector parse_vector(std::string_view text) {
    const json j = parse(text);
    if (j.is_object() && j.contains("grad")) return to_vector(j["grad"], "grad");
    return to_vector(j, "vector");
}

std::string gradients_json(const LqrGradients& g) {
    json j{{"A", from_matrices(g.gA)},
           {"B", from_matrices(g.gB)},
           {"Q", from_matrices(g.gQ)},
           {"R", from_matrices(g.gR)},
           {"h0", from_vector(g.g_h0)}};
    return j.dump();
}

std::string weights_json(const TtcLayerWeights& w) {
    json tensors = json::object();
    for_each_tensor(w, [&](const std::string& name, const auto& t) {
        using T = std::decay_t<decltype(t)>;
        json shape = T::ColsAtCompileTime == 1 ? json::array({t.rows()}) : json::array({t.rows(), t.cols()});
        // payload is row-major to match the JSON matrices elsewhere
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = t;
        tensors[name] = {{"shape", shape}, {"dtype", "f64le"}, {"data", base64_encode(to_le_bytes(rm.data(), rm.size()))}};
    });
    json j{{"format", "symlqr-weights-v1"},
           {"config",
            {{"model_dim", w.model_dim},
             {"heads", w.heads},
             {"head_dim", w.head_dim},
             {"basis", w.basis},
             {"guard_a", w.guard_a}}},
           {"tensors", std::move(tensors)}};
    return j.dump();
}

TtcLayerWeights parse_weights(std::string_view text) try {
    const json j = parse(text);
    if (!j.is_object() || j.value("format", "") != "symlqr-weights-v1") bad("not a symlqr-weights-v1 manifest");
    if (!j.contains("config") || !j.contains("tensors")) bad("manifest needs \"config\" and \"tensors\"");
    const json& c = j["config"];
    LayerConfig cfg;
    cfg.model_dim = integer(c, "model_dim");
    cfg.heads = integer(c, "heads");
    cfg.head_dim = integer(c, "head_dim");
    cfg.basis = integer(c, "basis");
    cfg.guard_a = c.value("guard_a", false);
    TtcLayerWeights w = init_weights(cfg, 0);  // shapes only; every tensor is overwritten
    const json& ts = j["tensors"];
    for_each_tensor(w, [&](const std::string& name, auto& t) {
        if (!ts.contains(name)) bad("manifest is missing tensor " + name);
        const json& e = ts[name];
        if (e.value("dtype", "") != "f64le") bad(name + ": dtype must be f64le");
        std::vector<Index> shape = e.at("shape").get<std::vector<Index>>();
        const Index rows = shape.empty() ? 0 : shape[0], cols = shape.size() > 1 ? shape[1] : 1;
        if (rows != t.rows() || cols != t.cols()) bad(name + ": shape does not match config");
        const auto bytes = base64_decode(e.at("data").get<std::string>());
        if (bytes.size() != static_cast<std::size_t>(rows * cols) * 8) bad(name + ": payload size does not match shape");
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
        from_le_bytes(bytes, rm.data());
        t = rm;
    });
    return w;
} catch (const json::exception& e) {
    bad(std::string("malformed weights manifest: ") + e.what());
}

}  // namespace symlqr::io
