// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "mao/backbone.hpp"
#include "mao/dataset.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mao;

namespace {

struct Fixture {
  Dataset ds = split_base_new(generate(DatasetSpec{}));
  Backbone bb{BackboneConfig{}};
  Fixture() { bb.bind(ds); }
};

Dataset tiny_dataset(std::size_t d_img) {
  DatasetSpec spec;
  spec.n_super = 3;
  spec.classes_per_super = 2;
  spec.d_img = d_img;
  spec.n_train_per_class = 4;
  spec.n_test_per_class = 4;
  return split_base_new(generate(spec));
}

}  // namespace

TEST_CASE("encode_text and encode_image match the scalar forward oracle") {
  Fixture f;
  const oracle::Encoder ref(f.bb);
  Rng rng(17);
  const Prompt p = f.bb.init_prompt(rng);
  for (std::size_t c = 0; c < f.ds.num_classes(); c += 5) {
    const auto got = oracle::to_vec(f.bb.encode_text(p.text.tokens.value, class_id(c)).data());
    const auto want = ref.text(p.text.tokens.value, class_id(c));
    REQUIRE(got.size() == 32);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
  const auto x = f.ds.features(image_id(123));
  const auto got = oracle::to_vec(f.bb.encode_image(x, nullptr).data());
  const auto want = ref.image(x);
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));

  CHECK(f.bb.encode_text(p.text.tokens.value, class_id(3)) ==
        f.bb.encode_text(p.text.tokens.value, class_id(3)));
  CHECK_FALSE(f.bb.encode_text(p.text.tokens.value, class_id(3)) ==
              f.bb.encode_text(f.bb.hard_template(), class_id(3)));
}

TEST_CASE("the ideal context maps class tokens onto image embeddings of their names") {
  BackboneConfig cfg;
  cfg.shape.global_name_offset = 0.0;
  cfg.shape.super_name_offset = 0.0;
  cfg.shape.ideal_context_scale = 0.75;
  Backbone bb(cfg);
  const Dataset ds = split_base_new(generate(DatasetSpec{}));
  bb.bind(ds);
  const Tensor& ideal = bb.frozen_params()[9]->value;
  for (std::size_t c = 0; c < ds.num_classes(); c += 7) {
    const auto g = oracle::to_vec(bb.encode_text(ideal, class_id(c)).data());
    const auto f = oracle::to_vec(bb.encode_image(ds.name_embedding(class_id(c)), nullptr).data());
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(f[i]).epsilon(1e-10));
  }
}

TEST_CASE("frozen weights are a pure function of the seed") {
  Backbone a{BackboneConfig{}}, b{BackboneConfig{}};
  const auto pa = a.frozen_params();
  const auto pb = b.frozen_params();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
  for (const Param* p : pa) CHECK_FALSE(p->trainable);

  BackboneConfig other;
  other.seed = 8;
  Backbone c(other);
  CHECK_FALSE(c.frozen_params()[0]->value == pa[0]->value);
  CHECK_FALSE(c.hard_template() == a.hard_template());
}

TEST_CASE("joint variant encodes the mean of prefix and features") {
  BackboneConfig cfg;
  cfg.variant = BackboneVariant::kJointPrompt;
  Backbone bb(cfg);
  const Dataset ds = split_base_new(generate(DatasetSpec{}));
  bb.bind(ds);
  const oracle::Encoder ref(bb);
  Rng rng(2);
  Prompt p = bb.init_prompt(rng);
  REQUIRE(p.visual.has_value());
  const auto x = ds.features(image_id(7));

  for (double& v : p.visual->prefix.value.data()) v = 0.0;
  std::copy(x.begin(), x.end(), p.visual->prefix.value.data().begin());
  CHECK(bb.encode_image(x, &*p.visual) == bb.encode_image(x, nullptr));

  Rng r2(3);
  for (double& v : p.visual->prefix.value.data()) v = r2.normal();
  const auto got = oracle::to_vec(bb.encode_image(x, &*p.visual).data());
  const auto want = ref.image(x, &p.visual->prefix.value);
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));

  // The text-prompt variant ignores a visual prefix.
  Fixture f;
  VisualPrompt vp{Param(Tensor({32}, 3.0), true)};
  CHECK(f.bb.encode_image(x, &vp) == f.bb.encode_image(x, nullptr));
}

TEST_CASE("predict_proba") {
  Fixture f;
  const oracle::Encoder ref(f.bb);
  Rng rng(5);
  const Prompt p = f.bb.init_prompt(rng);
  const auto x = f.ds.features(image_id(40));

  const std::vector<ClassId> one{class_id(4)};
  CHECK(f.bb.predict_proba(p, x, one) == std::vector<double>{1.0});

  const std::vector<ClassId> three{class_id(1), class_id(9), class_id(20)};
  const auto got = f.bb.predict_proba(p, x, three);
  const auto want = ref.proba(p.text.tokens.value, x, three);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(got[i] - want[i]) < 1e-12);
  CHECK(got[0] + got[1] + got[2] == doctest::Approx(1.0).epsilon(1e-12));

  // Rescaling the image embedding leaves the row unchanged: the similarity is a cosine.
  const auto fx = ref.image(x);
  auto scaled = fx;
  for (double& v : scaled) v *= 4.2;
  for (ClassId c : three) {
    auto g = ref.text(p.text.tokens.value, c);
    CHECK(oracle::cosine(g, fx) == doctest::Approx(oracle::cosine(g, scaled)).epsilon(1e-13));
  }

  const std::vector<ClassId> dup{class_id(1), class_id(1)};
  CHECK(test::error_code([&] { f.bb.predict_proba(p, x, dup); }) == ErrorCode::kCandidateSet);
  CHECK(test::error_code([&] { f.bb.predict_proba(p, x, std::vector<ClassId>{}); }) ==
        ErrorCode::kArgument);
  const std::vector<ClassId> unknown{class_id(99)};
  CHECK(test::error_code([&] { f.bb.predict_proba(p, x, unknown); }) == ErrorCode::kVocabulary);
  const std::vector<double> short_x(5, 0.1);
  CHECK(test::error_code([&] { f.bb.predict_proba(p, short_x, three); }) == ErrorCode::kShape);
  CHECK(test::error_code([&] { f.bb.encode_text(p.text.tokens.value, class_id(500)); }) ==
        ErrorCode::kVocabulary);
}

TEST_CASE("zero_shot_label") {
  Fixture f;
  const oracle::Encoder ref(f.bb);
  const auto cands = f.ds.new_classes();
  const auto imgs = f.ds.test_images(cands);
  for (std::size_t i = 0; i < imgs.size(); i += 37) {
    const auto x = f.ds.features(imgs[i].image);
    const auto [c, conf] = f.bb.zero_shot_label(x, cands);
    const auto [rc, rconf] = ref.top1(f.bb.hard_template(), x, cands);
    CHECK(c == rc);
    CHECK(conf == doctest::Approx(rconf).epsilon(1e-12));
  }

  const std::vector<ClassId> one{class_id(17)};
  const auto [c1, p1] = f.bb.zero_shot_label(f.ds.features(image_id(0)), one);
  CHECK(c1 == class_id(17));
  CHECK(p1 == 1.0);

  // With an exact template and no naming error, an image at a class's name
  // embedding lands on that class's text embedding.
  BackboneConfig cfg;
  cfg.shape.template_error = 0.0;
  cfg.shape.global_name_offset = 0.0;
  cfg.shape.super_name_offset = 0.0;
  Backbone exact(cfg);
  exact.bind(f.ds);
  const auto all = f.ds.all_classes();
  for (ClassId c : all) {
    CHECK(exact.zero_shot_label(f.ds.name_embedding(c), all).first == c);
  }
}

TEST_CASE("param_count counts prompt tensors only") {
  BackboneConfig cfg;
  cfg.context_length = 4;
  cfg.d_token = 32;
  CHECK(Backbone(cfg).param_count() == 128);
  cfg.variant = BackboneVariant::kJointPrompt;
  cfg.d_img = 64;
  CHECK(Backbone(cfg).param_count() == 192);

  Backbone bb(cfg);
  Rng rng(1);
  Prompt p = bb.init_prompt(rng);
  std::size_t trainable = 0;
  for (const Param* q : p.params()) {
    CHECK(q->trainable);
    trainable += q->value.size();
  }
  CHECK(trainable == bb.param_count());
}

TEST_CASE("cross_entropy gradients match finite differences") {
  for (auto variant : {BackboneVariant::kTextPrompt, BackboneVariant::kJointPrompt}) {
    BackboneConfig cfg;
    cfg.variant = variant;
    cfg.tau = 0.1;
    Backbone bb(cfg);
    const Dataset ds = split_base_new(generate(DatasetSpec{}));
    bb.bind(ds);
    Rng rng(31);
    Prompt prompt = bb.init_prompt(rng);
    std::vector<Example> items;
    const auto test = ds.test_images(ds.base_classes());
    for (std::size_t i = 0; i < 6; ++i) {
      const auto& t = test[i * 50];
      items.push_back({ds.features(t.image), t.label});
    }
    const auto cands = ds.base_classes();
    for (Param* target : prompt.params()) {
      const double err = finite_diff_check(
          [&](Param&) { return bb.cross_entropy(prompt, items, cands, true); }, *target, 1e-5);
      CHECK(err < 1e-4);
    }
  }
}

TEST_CASE("backward leaves frozen gradients at zero") {
  Fixture f;
  Rng rng(4);
  Prompt p = f.bb.init_prompt(rng);
  const auto test = f.ds.test_images(f.ds.base_classes());
  std::vector<Example> items{{f.ds.features(test[0].image), test[0].label}};
  f.bb.cross_entropy(p, items, f.ds.base_classes(), true);
  bool nonzero = false;
  for (double g : p.text.tokens.grad.data()) nonzero |= g != 0.0;
  CHECK(nonzero);
  for (const Param* q : f.bb.frozen_params())
    for (double g : q->grad.data()) CHECK(g == 0.0);
}

TEST_CASE("bind checks the concept dimension") {
  Backbone bb{BackboneConfig{}};
  CHECK(test::error_code([&] { bb.bind(tiny_dataset(16)); }) == ErrorCode::kCompatibility);
  bb.bind(tiny_dataset(32));
  CHECK(bb.vocab_size() == 6);
}

TEST_CASE("config validation") {
  BackboneConfig cfg;
  cfg.tau = 0.0;
  CHECK(test::error_code([&] { Backbone b(cfg); }) == ErrorCode::kConfig);
  cfg = {};
  cfg.context_length = 0;
  CHECK(test::error_code([&] { Backbone b(cfg); }) == ErrorCode::kConfig);
  CHECK(parse_variant("joint") == BackboneVariant::kJointPrompt);
  CHECK(std::string(variant_name(parse_variant(variant_name(BackboneVariant::kTextPrompt)))) ==
        variant_name(BackboneVariant::kTextPrompt));
}
