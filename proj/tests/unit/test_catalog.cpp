#include <gtest/gtest.h>

#include <set>

#include "kcontact/catalog.hpp"

using namespace kcontact;

TEST(Catalog, IdsAreUniqueAndResolvable) {
  auto ids = list_models();
  EXPECT_EQ(ids.size(), 13u);
  EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()).size(), ids.size());
  for (const auto& id : ids) EXPECT_EQ(get_model(id).id, id);
  try {
    get_model("nope");
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("damped_wave"), std::string::npos);
  }
}

TEST(Catalog, EveryModelMatchesItsTarget) {
  for (const auto& id : list_models()) {
    Model m(get_model(id));
    auto jets = sample_jets(m, 50, 17);
    auto agree = compare_with_target(m, jets);
    EXPECT_EQ(agree.samples, 50u);
    EXPECT_LE(agree.max_abs_difference, 1e-10 * std::max(1.0, agree.max_abs_target)) << id;
    EXPECT_GT(agree.max_abs_target, 0.0) << id;
  }
}

TEST(Catalog, ParameterAndMacroOverrides) {
  Model m(get_model("burgers_family"), {{"nu", 0.2}}, {{"B", "u^2"}});
  EXPECT_DOUBLE_EQ(m.space().parameter("nu"), 0.2);
  EXPECT_LE(compare_with_target(m, sample_jets(m, 20, 3)).max_abs_difference, 1e-10);
  EXPECT_THROW(Model(get_model("burgers_family"), {{"mu", 1.0}}), std::invalid_argument);
}

TEST(Catalog, ReductionBlocks) {
  Model m(get_model("fitzhugh_nagumo"));
  EXPECT_EQ(m.evolved_fields(), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(m.pinned_fields(), (std::vector<std::size_t>{2, 3}));
  auto pde = m.reconstructed();
  EXPECT_EQ(pde.time_order(), 1);
  EXPECT_EQ(pde.evolved().size(), 2u);
}

TEST(Catalog, SampledPointsRespectBounds) {
  Model m(get_model("pme_absorption"));
  for (const auto& pt : sample_points(m, 100, 1)) EXPECT_GT(pt[0], 0.19);
  auto a = sample_points(m, 3, 42), b = sample_points(m, 3, 42);
  EXPECT_EQ(a, b);
}
