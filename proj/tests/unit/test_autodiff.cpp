#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>

#include "barcodelm/gradcheck.hpp"
#include "barcodelm/nn_ops.hpp"
#include "barcodelm/rng.hpp"

using namespace barcodelm;
using namespace barcodelm::nn;

namespace {

TensorData<double> random_tensor(std::vector<std::int64_t> shape, Rng& rng, double scale = 1.0) {
  TensorData<double> t(std::move(shape));
  for (auto& v : t.v) v = rng.normal() * scale;
  return t;
}

// Builds a scalar loss from named inputs, returns loss and analytic grads.
using GraphFn = std::function<Value<double>(Tape<double>&, std::map<std::string, Value<double>>&)>;

double run_fd_check(const NamedTensors<double>& params, const GraphFn& graph, int probes = 120,
                    double epsilon = 1e-6) {
  auto loss_only = [&](const NamedTensors<double>& p) {
    Tape<double> tape;
    auto bound = bind_parameters(tape, p, false);
    return graph(tape, bound).data().v[0];
  };
  Tape<double> tape;
  auto bound = bind_parameters(tape, params, true);
  auto loss = graph(tape, bound);
  tape.backward(loss.id);
  auto grads = collect_gradients(tape, bound);
  return finite_difference_check(loss_only, params, grads, probes, epsilon, /*seed=*/17);
}

}  // namespace

TEST_CASE("matmul 2D forward and gradient") {
  Rng rng(1);
  NamedTensors<double> params;
  params["a"] = random_tensor({3, 4}, rng);
  params["b"] = random_tensor({4, 5}, rng);
  auto graph = [](Tape<double>& t, std::map<std::string, Value<double>>& p) {
    return sum_all(tanh_act(matmul(p.at("a"), p.at("b"))));
  };
  CHECK(run_fd_check(params, graph) < 1e-5);
}

TEST_CASE("matmul batched 3D x 2D gradient") {
  Rng rng(2);
  NamedTensors<double> params;
  params["a"] = random_tensor({2, 3, 4}, rng);
  params["b"] = random_tensor({4, 5}, rng);
  auto graph = [](Tape<double>& t, std::map<std::string, Value<double>>& p) {
    return sum_all(tanh_act(matmul(p.at("a"), p.at("b"))));
  };
  CHECK(run_fd_check(params, graph) < 1e-5);
}

TEST_CASE("matmul rejects mismatched shapes with a message naming the op") {
  Tape<double> tape;
  auto a = make_leaf(tape, TensorData<double>({2, 3}), false);
  auto b = make_leaf(tape, TensorData<double>({4, 5}), false);
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("matmul"), MathError);
}

TEST_CASE("add with same shape and bias broadcast") {
  Rng rng(3);
  NamedTensors<double> params;
  params["x"] = random_tensor({3, 4}, rng);
  params["y"] = random_tensor({3, 4}, rng);
  params["bias"] = random_tensor({4}, rng);
  auto graph = [](Tape<double>& t, std::map<std::string, Value<double>>& p) {
    return sum_all(tanh_act(add(add(p.at("x"), p.at("y")), p.at("bias"))));
  };
  CHECK(run_fd_check(params, graph) < 1e-5);
}

TEST_CASE("embedding lookup gradient scatters into rows") {
  Rng rng(4);
  NamedTensors<double> params;
  params["table"] = random_tensor({7, 3}, rng);
  IntMatrix ids(2, 4);
  for (std::int64_t i = 0; i < 2; ++i) {
    for (std::int64_t j = 0; j < 4; ++j) ids.at(i, j) = static_cast<std::int32_t>(rng.bounded(7));
  }
  auto graph = [&ids](Tape<double>& t, std::map<std::string, Value<double>>& p) {
    return sum_all(tanh_act(embedding_lookup(p.at("table"), ids)));
  };
  CHECK(run_fd_check(params, graph) < 1e-5);
}

TEST_CASE("layer norm gradient") {
  Rng rng(5);
  NamedTensors<double> params;
  params["x"] = random_tensor({3, 4}, rng);
  params["gamma"] = random_tensor({4}, rng);
  params["beta"] = random_tensor({4}, rng);
  auto graph = [](Tape<double>& t, std::map<std::string, Value<double>>& p) {
    return sum_all(tanh_act(layer_norm(p.at("x"), p.at("gamma"), p.at("beta"))));
  };
  CHECK(run_fd_check(params, graph, 200) < 1e-5);
}

TEST_CASE("softmax rows sum to one and gradient checks") {
  Rng rng(6);
  NamedTensors<double> params;
  params["x"] = random_tensor({3, 4}, rng);
  {
    Tape<double> tape;
    auto x = make_leaf(tape, params["x"], false);
    auto y = softmax(x);
    for (std::int64_t i = 0; i < 3; ++i) {
      double sum = 0;
      for (std::int64_t j = 0; j < 4; ++j) sum += y.data().at2(i, j);
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
  // tanh after softmax so the summed loss has a nontrivial gradient
  auto graph = [](Tape<double>& t, std::map<std::string, Value<double>>& p) {
    return sum_all(tanh_act(softmax(p.at("x"))));
  };
  CHECK(run_fd_check(params, graph, 100) < 1e-5);
}

TEST_CASE("scaled dot-product attention gradient with key masking") {
  Rng rng(7);
  NamedTensors<double> params;
  params["q"] = random_tensor({2, 3, 4}, rng);
  params["k"] = random_tensor({2, 3, 4}, rng);
  params["v"] = random_tensor({2, 3, 4}, rng);
  BoolMatrix mask(2, 3, true);
  mask.set(1, 2, false);  // one padded key
  auto graph = [&mask](Tape<double>& t, std::map<std::string, Value<double>>& p) {
    return sum_all(tanh_act(
        scaled_dot_product_attention(p.at("q"), p.at("k"), p.at("v"), mask)));
  };
  CHECK(run_fd_check(params, graph, 200) < 1e-5);
}

TEST_CASE("attention output ignores masked keys") {
  Rng rng(8);
  auto q = random_tensor({1, 2, 4}, rng);
  auto k = random_tensor({1, 2, 4}, rng);
  auto v = random_tensor({1, 2, 4}, rng);
  BoolMatrix mask(1, 2, true);
  mask.set(0, 1, false);

  Tape<double> tape;
  auto out = scaled_dot_product_attention(make_leaf(tape, q, false), make_leaf(tape, k, false),
                                          make_leaf(tape, v, false), mask);
  // With only key 0 attendable, every output row equals v[0].
  for (std::int64_t i = 0; i < 2; ++i) {
    for (std::int64_t c = 0; c < 4; ++c) {
      CHECK(out.data().at3(0, i, c) == doctest::Approx(v.at3(0, 0, c)).epsilon(1e-12));
    }
  }
}

TEST_CASE("gelu and tanh gradients") {
  Rng rng(9);
  NamedTensors<double> params;
  params["x"] = random_tensor({3, 4}, rng);
  auto g1 = [](Tape<double>& t, std::map<std::string, Value<double>>& p) {
    return sum_all(gelu(p.at("x")));
  };
  CHECK(run_fd_check(params, g1) < 1e-5);
  auto g2 = [](Tape<double>& t, std::map<std::string, Value<double>>& p) {
    return sum_all(tanh_act(p.at("x")));
  };
  CHECK(run_fd_check(params, g2) < 1e-5);
}

TEST_CASE("dropout is deterministic per seed and gradient-consistent") {
  Rng rng(10);
  NamedTensors<double> params;
  params["x"] = random_tensor({4, 5}, rng);
  auto graph = [](Tape<double>& t, std::map<std::string, Value<double>>& p) {
    return sum_all(tanh_act(dropout(p.at("x"), 0.6, true, /*seed=*/33)));
  };
  CHECK(run_fd_check(params, graph) < 1e-5);

  Tape<double> tape;
  auto x = make_leaf(tape, params["x"], false);
  auto a = dropout(x, 0.6, true, 33);
  auto b = dropout(x, 0.6, true, 33);
  CHECK(a.data().v == b.data().v);
  auto c = dropout(x, 0.6, false, 33);
  CHECK(c.data().v == params["x"].v);  // identity in eval mode
}

TEST_CASE("conv1d same-padding gradient") {
  Rng rng(11);
  NamedTensors<double> params;
  params["x"] = random_tensor({2, 6, 3}, rng);
  params["w"] = random_tensor({5, 3, 4}, rng, 0.5);
  params["b"] = random_tensor({4}, rng);
  auto graph = [](Tape<double>& t, std::map<std::string, Value<double>>& p) {
    return sum_all(tanh_act(conv1d_same(p.at("x"), p.at("w"), p.at("b"))));
  };
  CHECK(run_fd_check(params, graph, 200) < 1e-5);
}

TEST_CASE("batch norm training-mode gradient") {
  Rng rng(12);
  NamedTensors<double> params;
  params["x"] = random_tensor({6, 3}, rng);
  params["gamma"] = random_tensor({3}, rng);
  params["beta"] = random_tensor({3}, rng);
  auto graph = [](Tape<double>& t, std::map<std::string, Value<double>>& p) {
    // fresh running stats every call: the update is a side effect, not part
    // of the differentiated function
    TensorData<double> rm({3}), rv = TensorData<double>::full({3}, 1.0);
    return sum_all(tanh_act(batch_norm(p.at("x"), p.at("gamma"), p.at("beta"), rm, rv, true)));
  };
  CHECK(run_fd_check(params, graph, 200) < 1e-5);
}

TEST_CASE("batch norm eval mode uses running statistics") {
  Rng rng(13);
  auto x = random_tensor({4, 2}, rng);
  TensorData<double> gamma = TensorData<double>::full({2}, 1.0);
  TensorData<double> beta({2});
  TensorData<double> rm = TensorData<double>::full({2}, 0.5);
  TensorData<double> rv = TensorData<double>::full({2}, 2.0);
  auto rm_before = rm, rv_before = rv;

  Tape<double> tape;
  auto out = batch_norm(make_leaf(tape, x, false), make_leaf(tape, gamma, false),
                        make_leaf(tape, beta, false), rm, rv, false);
  CHECK(rm.v == rm_before.v);  // untouched in eval
  CHECK(rv.v == rv_before.v);
  for (std::int64_t r = 0; r < 4; ++r) {
    for (std::int64_t c = 0; c < 2; ++c) {
      const double expect = (x.at2(r, c) - 0.5) / std::sqrt(2.0 + 1e-5);
      CHECK(out.data().at2(r, c) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("max pool forward and gradient") {
  Rng rng(14);
  NamedTensors<double> params;
  params["x"] = random_tensor({2, 6, 3}, rng);
  auto graph = [](Tape<double>& t, std::map<std::string, Value<double>>& p) {
    return sum_all(tanh_act(max_pool1d(p.at("x"), 2)));
  };
  CHECK(run_fd_check(params, graph, 150) < 1e-5);

  Tape<double> tape;
  auto out = max_pool1d(make_leaf(tape, params["x"], false), 2);
  CHECK(out.shape() == std::vector<std::int64_t>{2, 3, 3});
}

TEST_CASE("split/merge heads round-trip and gradient") {
  Rng rng(15);
  NamedTensors<double> params;
  params["x"] = random_tensor({2, 3, 8}, rng);
  auto graph = [](Tape<double>& t, std::map<std::string, Value<double>>& p) {
    return sum_all(tanh_act(merge_heads(split_heads(p.at("x"), 4), 4)));
  };
  CHECK(run_fd_check(params, graph) < 1e-5);

  Tape<double> tape;
  auto x = make_leaf(tape, params["x"], false);
  auto roundtrip = merge_heads(split_heads(x, 4), 4);
  CHECK(roundtrip.data().v == params["x"].v);
}

TEST_CASE("masked mean pool excludes padded positions and errors on empty rows") {
  Tape<double> tape;
  TensorData<double> x({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  BoolMatrix mask(2, 2, true);
  auto pooled = masked_mean_pool(make_leaf(tape, x, false), mask);
  CHECK(pooled.data().at2(0, 0) == 2.0);
  CHECK(pooled.data().at2(0, 1) == 3.0);

  BoolMatrix with_pad(2, 2, true);
  with_pad.set(0, 1, false);
  auto pooled2 = masked_mean_pool(make_leaf(tape, x, false), with_pad);
  CHECK(pooled2.data().at2(0, 0) == 1.0);  // only first position counted

  BoolMatrix empty_row(2, 2, true);
  empty_row.set(1, 0, false);
  empty_row.set(1, 1, false);
  CHECK_THROWS_AS(masked_mean_pool(make_leaf(tape, x, false), empty_row), MathError);
}

TEST_CASE("masked mean pool gradient") {
  Rng rng(16);
  NamedTensors<double> params;
  params["x"] = random_tensor({2, 4, 3}, rng);
  BoolMatrix mask(2, 4, true);
  mask.set(0, 3, false);
  mask.set(1, 2, false);
  mask.set(1, 3, false);
  auto graph = [&mask](Tape<double>& t, std::map<std::string, Value<double>>& p) {
    return sum_all(tanh_act(masked_mean_pool(p.at("x"), mask)));
  };
  CHECK(run_fd_check(params, graph) < 1e-5);
}

TEST_CASE("masked cross-entropy closed forms") {
  // uniform logits over V classes -> ln V
  const std::int64_t V = 258;
  Tape<double> tape;
  TensorData<double> logits({2, V});
  auto lv = make_leaf(tape, logits, false);
  std::vector<std::int32_t> targets = {5, 17};
  std::vector<std::uint8_t> mask = {1, 1};
  auto result = masked_cross_entropy(lv, targets, mask);
  CHECK(result.loss.data().v[0] == doctest::Approx(std::log(258.0)).epsilon(1e-12));
  CHECK(result.counted == 2);

  // one-hot logits at targets -> loss ~ 0, accuracy 1
  TensorData<double> sharp({2, V});
  sharp.at2(0, 5) = 50.0;
  sharp.at2(1, 17) = 50.0;
  auto result2 = masked_cross_entropy(make_leaf(tape, sharp, false), targets, mask);
  CHECK(result2.loss.data().v[0] < 1e-9);
  CHECK(result2.accuracy == 1.0);
}

TEST_CASE("masked cross-entropy gradient and mask-only contract") {
  Rng rng(18);
  NamedTensors<double> params;
  params["logits"] = random_tensor({4, 6}, rng);
  std::vector<std::int32_t> targets = {1, 2, 3, 0};
  std::vector<std::uint8_t> mask = {1, 0, 1, 1};
  auto graph = [&](Tape<double>& t, std::map<std::string, Value<double>>& p) {
    return masked_cross_entropy(p.at("logits"), targets, mask).loss;
  };
  CHECK(run_fd_check(params, graph, 100) < 1e-5);

  // gradient at non-masked rows is exactly zero
  Tape<double> tape;
  auto bound = bind_parameters(tape, params, true);
  auto result = masked_cross_entropy(bound.at("logits"), targets, mask);
  tape.backward(result.loss.id);
  const auto& grad = tape.node(bound.at("logits").id).grad;
  for (std::int64_t j = 0; j < 6; ++j) CHECK(grad.at2(1, j) == 0.0);

  // perturbing a non-masked logit leaves the loss unchanged
  auto perturbed = params;
  perturbed["logits"].at2(1, 3) += 10.0;
  Tape<double> tape2;
  auto bound2 = bind_parameters(tape2, perturbed, false);
  auto result2 = masked_cross_entropy(bound2.at("logits"), targets, mask);
  CHECK(result2.loss.data().v[0] == doctest::Approx(result.loss.data().v[0]).epsilon(1e-15));
}

TEST_CASE("masked cross-entropy with an all-false mask is an error") {
  Tape<double> tape;
  auto logits = make_leaf(tape, TensorData<double>({2, 3}), false);
  std::vector<std::int32_t> targets = {0, 1};
  std::vector<std::uint8_t> mask = {0, 0};
  CHECK_THROWS_AS(masked_cross_entropy(logits, targets, mask), MathError);
}

TEST_CASE("batch loss times counted positions equals summed contributions") {
  Rng rng(19);
  auto logits = random_tensor({5, 7}, rng);
  std::vector<std::int32_t> targets = {1, 2, 3, 4, 5};
  std::vector<std::uint8_t> mask = {1, 1, 0, 1, 1};

  Tape<double> tape;
  auto mean_result = masked_cross_entropy(make_leaf(tape, logits, false), targets, mask);
  double manual_sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!mask[i]) continue;
    std::vector<std::uint8_t> single(5, 0);
    single[i] = 1;
    Tape<double> t2;
    manual_sum += masked_cross_entropy(make_leaf(t2, logits, false), targets, single)
                      .loss.data().v[0];
  }
  CHECK(mean_result.loss.data().v[0] * static_cast<double>(mean_result.counted) ==
        doctest::Approx(manual_sum).epsilon(1e-12));
}

TEST_CASE("finite_difference_check on a quadratic is near exact") {
  Rng rng(20);
  NamedTensors<double> params;
  params["p"] = random_tensor({8}, rng);
  auto loss = [](const NamedTensors<double>& p) {
    double sum = 0;
    for (double v : p.at("p").v) sum += 0.5 * v * v;
    return sum;
  };
  NamedTensors<double> grads;
  grads["p"] = params["p"];  // d(q)/dp = p
  CHECK(finite_difference_check(loss, params, grads, 32, 1e-6) < 1e-8);
}

TEST_CASE("finite_difference_check rejects probe_count 0") {
  NamedTensors<double> params;
  params["p"] = TensorData<double>({2});
  auto loss = [](const NamedTensors<double>&) { return 0.0; };
  CHECK_THROWS_AS(finite_difference_check(loss, params, params, 0, 1e-6), ConfigError);
}
