#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "retrologic/chem/smiles.hpp"
#include "retrologic/error.hpp"
#include "retrologic/match/matcher.hpp"
#include "retrologic/templates/retro_template.hpp"
#include "test_support.hpp"

namespace retrologic {
namespace {

ReactionRecord record(const std::string& text) {
  auto parsed = parse_reaction(text);
  return {"r", parsed.products.at(0), parsed.reactants, std::nullopt};
}

std::vector<CanonicalKey> keys_of(std::initializer_list<const char*> smiles) {
  std::vector<MolGraph> mols;
  for (const char* s : smiles) mols.push_back(parse_molecule(s));
  return make_reactant_set(std::move(mols)).keys;
}

bool contains_set(const std::vector<ReactantSet>& sets, const std::vector<CanonicalKey>& keys) {
  return std::any_of(sets.begin(), sets.end(), [&](const auto& s) { return s.keys == keys; });
}

// Retro ester hydrolysis written by hand; H counts are left open so it
// applies to plain heavy-atom input.
RetroTemplate ester_template() {
  return parse_template("[C:1](=[O:2])-[O:3]-[C:4]>>[C:1](=[O:2])-O.[O:3]-[C:4]");
}

const char* kEsterification =
    "[CH3:1][C:2](=[O:3])[OH:10].[OH:4][CH3:5]>>[CH3:1][C:2](=[O:3])[O:4][CH3:5]";

TEST(ParseReaction, SidesAndAgents) {
  const auto r = parse_reaction("CC(=O)O.OC>[Na+]>CC(=O)OC");
  EXPECT_EQ(r.reactants.size(), 2u);
  EXPECT_EQ(r.agents.size(), 1u);
  EXPECT_EQ(r.products.size(), 1u);
  EXPECT_EQ(parse_reaction("C>>C").agents.size(), 0u);
}

TEST(ParseReaction, OffsetsAreRelativeToTheWholeString) {
  try {
    parse_reaction("CC.C(C>>C");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
  EXPECT_THROW(parse_reaction("CC"), ParseError);
  EXPECT_THROW(parse_reaction(">>C"), ParseError);
  EXPECT_THROW(parse_reaction("C>>C>C"), ParseError);
  EXPECT_THROW(parse_reaction("C>>F/C=C/F"), UnsupportedFeature);
}

TEST(ValidateMapping, RejectsBrokenMaps) {
  EXPECT_THROW(validate_mapping(record("[CH4:1]>>[CH3:1]C")), DataError);
  EXPECT_THROW(validate_mapping(record("[CH4:1]>>[CH4:2]")), DataError);
  EXPECT_THROW(validate_mapping(record("[CH4:1].[CH4:1]>>[CH3:1][CH3:2]")), DataError);
  EXPECT_NO_THROW(validate_mapping(record(kEsterification)));
}

TEST(ExtractTemplate, EsterificationRadiusZero) {
  const auto rxn = record(kEsterification);
  const auto t = extract_template(rxn, 0);
  ASSERT_EQ(t.product_pattern.node_count(), 2u);
  ASSERT_EQ(t.product_pattern.edge_count(), 1u);
  EXPECT_EQ(t.product_pattern.edge(0).order, BondOrder::Single);
  std::multiset<Element> elements;
  for (const auto& n : t.product_pattern.nodes()) elements.insert(*n.element);
  EXPECT_EQ(elements, (std::multiset<Element>{Element::C, Element::O}));
  EXPECT_EQ(t.n_reactants(), 2u);
  const auto sets = apply_template(t, rxn.product);
  EXPECT_TRUE(contains_set(sets, keys_of({"[CH3]C(=O)[OH]", "[OH][CH3]"})));
}

TEST(ExtractTemplate, EmptyCenter) {
  EXPECT_THROW(extract_template(record("[CH3:1][OH:2]>>[CH3:1][OH:2]")), DataError);
}

TEST(ExtractTemplate, ReagentsAreDropped) {
  const auto t = extract_template(
      record("[CH3:1][C:2](=[O:3])[OH:10].[OH:4][CH3:5].[Na+]>>[CH3:1][C:2](=[O:3])[O:4][CH3:5]"));
  EXPECT_EQ(t.n_reactants(), 2u);
}

TEST(ExtractTemplate, ClassTagCarriesOver) {
  auto rxn = record(kEsterification);
  rxn.reaction_class = 3;
  EXPECT_EQ(extract_template(rxn).class_tag, 3);
}

TEST(ExtractTemplate, RoundTripOnSyntheticReactions) {
  std::mt19937_64 rng(43);
  int done = 0;
  for (int i = 0; i < 400; ++i) {
    const auto syn = testing::random_reaction(rng, {.min_atoms = 3, .max_atoms = 12});
    if (!syn) continue;
    const ReactionRecord rxn{"s", syn->product, syn->reactants, std::nullopt};
    for (int radius : {0, 1, 2}) {
      RetroTemplate t;
      try {
        t = extract_template(rxn, radius);
      } catch (const DataError& e) {
        FAIL() << e.what() << " in " << write_molecule(rxn.product, {.map_labels = true});
      }
      const auto truth = make_reactant_set(syn->reactants);
      const auto sets = apply_template(t, rxn.product);
      ASSERT_TRUE(contains_set(sets, truth.keys))
          << t.template_key << " on " << write_molecule(rxn.product, {.map_labels = true});
    }
    ++done;
  }
  EXPECT_GT(done, 200);
}

TEST(TemplateKey, InvariantUnderRelabelingAndReordering) {
  std::mt19937_64 rng(47);
  int done = 0;
  for (int i = 0; i < 200; ++i) {
    const auto syn = testing::random_reaction(rng, {.min_atoms = 3, .max_atoms = 10});
    if (!syn) continue;
    const auto key = extract_template({"a", syn->product, syn->reactants, std::nullopt}).template_key;
    for (int k = 0; k < 5; ++k) {
      const auto other = testing::scramble(rng, *syn);
      ASSERT_EQ(extract_template({"b", other.product, other.reactants, std::nullopt}).template_key,
                key);
    }
    ++done;
  }
  EXPECT_GT(done, 100);
}

TEST(TemplateKey, TextRoundTripIsIdempotent) {
  std::mt19937_64 rng(53);
  for (int i = 0; i < 200; ++i) {
    const auto syn = testing::random_reaction(rng);
    if (!syn) continue;
    const auto t = extract_template({"a", syn->product, syn->reactants, std::nullopt});
    const auto back = parse_template(t.template_key);
    EXPECT_EQ(back.template_key, t.template_key);
    EXPECT_EQ(back.product_pattern, t.product_pattern);
    EXPECT_EQ(back.reactant_patterns, t.reactant_patterns);
  }
}

TEST(TemplateKey, DistinguishesRules) {
  const auto ester = ester_template();
  const auto amide = parse_template("[C:1](=[O:2])-[N:3]-[C:4]>>[C:1](=[O:2])-O.[N:3]-[C:4]");
  const auto chloride = parse_template("[C:1](=[O:2])-[O:3]-[C:4]>>[C:1](=[O:2])-Cl.[O:3]-[C:4]");
  // Same product pattern, mapping moved to the other oxygen.
  const auto swapped = parse_template("[C:1](=[O:2])-[O:3]-[C:4]>>[C:1](=O)-[O:3].[O:2]-[C:4]");
  EXPECT_NE(ester.template_key, amide.template_key);
  EXPECT_NE(ester.template_key, chloride.template_key);
  EXPECT_NE(ester.template_key, swapped.template_key);
  EXPECT_EQ(ester.template_key,
            parse_template("[C:7]-[O:5]-[C:9]=[O:2]>>[O:5]-[C:7].O-[C:9]=[O:2]").template_key);
}

TEST(MakeTemplate, RejectsInconsistentRules) {
  EXPECT_THROW(parse_template("[C:1]-[O:2]>>[C:1]O"), DataError);            // label 2 lost
  EXPECT_THROW(parse_template("[C:1]-[O:2]>>[C:1]O.[O:2][C:3]"), DataError); // label 3 new
  EXPECT_THROW(parse_template("[C:1]-[O:2]>>[C:1]*.[O:2]"), DataError);      // wildcard leaving
  EXPECT_THROW(parse_template("[C:1]-[O:2]>>[C:1].[O:2].[C:1]"), DataError); // label reused
  EXPECT_THROW(parse_template("[C:1].[O:2]>>[C:1].[O:2]"), ParseError);
  EXPECT_THROW(parse_template("[C:1]-[O:2]"), ParseError);
}

TEST(ApplyTemplate, EsterOnMethylAcetate) {
  const auto sets = apply_template(ester_template(), parse_molecule("CC(=O)OC"));
  ASSERT_EQ(sets.size(), 1u);
  EXPECT_EQ(sets[0].keys, keys_of({"CC(=O)O", "CO"}));
}

TEST(ApplyTemplate, AbsentPattern) {
  EXPECT_TRUE(apply_template(ester_template(), parse_molecule("CC")).empty());
}

TEST(ApplyTemplate, SymmetricMatchesCollapse) {
  const auto t = parse_template("[C:1]-[O:2]>>[C:1]-Br.[O:2]");
  const auto ether = parse_molecule("COC");
  EXPECT_EQ(find_matches(t.product_pattern, ether).size(), 2u);
  const auto sets = apply_template(t, ether);
  ASSERT_EQ(sets.size(), 1u);
  EXPECT_EQ(sets[0].keys, keys_of({"CBr", "OC"}));
}

TEST(ApplyTemplate, BridgingAtomsDiscardTheMatch) {
  const auto t = parse_template("[C:1]-[C:2]>>[C:1]-Br.[C:2]-Br");
  EXPECT_TRUE(apply_template(t, parse_molecule("C1CCC1")).empty());
  const auto open = apply_template(t, parse_molecule("CCC"));
  ASSERT_EQ(open.size(), 1u);
  EXPECT_EQ(open[0].keys, keys_of({"CBr", "CCBr"}));
}

TEST(ApplyTemplate, UnlabeledProductNodesAreDeleted) {
  const auto t = parse_template("[C:1]-O>>[C:1]");
  const auto sets = apply_template(t, parse_molecule("CCO"));
  ASSERT_EQ(sets.size(), 1u);
  EXPECT_EQ(sets[0].keys, keys_of({"CC"}));
}

TEST(ApplyTemplate, ResultsSatisfyReactantPredicate) {
  std::mt19937_64 rng(59);
  // A narrow vocabulary makes templates from one reaction fire on others.
  const testing::RandomMolOptions opt{.min_atoms = 3, .max_atoms = 9,
                                      .elements = {Element::C, Element::O},
                                      .aromatic_prob = 0.0, .vary_charge = false};
  std::vector<RetroTemplate> templates = {ester_template()};
  std::vector<MolGraph> products = {parse_molecule("CC(=O)OC")};
  while (templates.size() < 60) {
    const auto syn = testing::random_reaction(rng, opt);
    if (!syn) continue;
    templates.push_back(extract_template({"t", syn->product, syn->reactants, std::nullopt}));
    products.push_back(syn->product);
  }
  std::size_t produced = 0;
  for (const auto& mol : products) {
    for (const auto& t : templates) {
      for (const auto& r : apply_template(t, mol)) {
        ++produced;
        ASSERT_TRUE(phi_match_reactants(mol, t, r.molecules)) << t.template_key;
      }
    }
  }
  EXPECT_GT(produced, 60u);
}

TEST(DedupReactantSets, Idempotent) {
  std::vector<ReactantSet> sets = {make_reactant_set({parse_molecule("CO"), parse_molecule("CC")}),
                                   make_reactant_set({parse_molecule("CC"), parse_molecule("OC")}),
                                   make_reactant_set({parse_molecule("CO")})};
  const auto once = dedup_reactant_sets(sets);
  EXPECT_EQ(once.size(), 2u);
  EXPECT_EQ(dedup_reactant_sets(once), once);
}

TEST(PhiMatchTemplate, Examples) {
  TemplateTable known;
  const auto ester = ester_template();
  known.add(ester);
  EXPECT_TRUE(phi_match_template(parse_molecule("CC(=O)OC"), ester, known));
  EXPECT_FALSE(phi_match_template(parse_molecule("CC"), ester, known));
  EXPECT_FALSE(phi_match_template(parse_molecule("CC(=O)OC"), ester, TemplateTable{}));
}

TEST(PhiMatchReactants, Examples) {
  const auto ester = ester_template();
  const auto product = parse_molecule("CC(=O)OC");
  EXPECT_TRUE(phi_match_reactants(product, ester, {parse_molecule("CC(=O)O"), parse_molecule("CO")}));
  EXPECT_TRUE(phi_match_reactants(product, ester, {parse_molecule("CO"), parse_molecule("CC(=O)O")}));
  EXPECT_FALSE(phi_match_reactants(product, ester, {parse_molecule("CC(=O)O")}));
  EXPECT_FALSE(phi_match_reactants(product, ester, {parse_molecule("CC"), parse_molecule("CO")}));
}

TEST(PhiMatchReactants, ArityLimit) {
  const auto t = parse_template("[C:1]1-[C:2]-[C:3]-[C:4]-[C:5]-[C:6]-1>>[C:1].[C:2].[C:3].[C:4].[C:5].[C:6]");
  EXPECT_EQ(t.n_reactants(), 6u);
  EXPECT_THROW(phi_match_reactants(parse_molecule("C"), t, {}), SizeLimitError);
}

TEST(LoadTemplates, CountsParsedRejectedAndDuplicates) {
  const auto ester = ester_template();
  std::stringstream in;
  in << "# comment\n"
     << format_template_line(ester) << "\n"
     << "[O:3](-[C:4])-[C:1]=[O:2]>>[C:1](=[O:2])-O.[O:3]-[C:4]\t2\n"  // duplicate
     << "[C:1]-[O:2]>>[C:1]-Br.[O:2]\t11\n"                              // bad class
     << "[C:1]-[O:2]>>[C:1]-Br\n"                                        // lost label
     << "[C:1]-[O:2]>>[C:1]-Br.[O:2\n"                                   // syntax
     << "\n"
     << "[C:1]-[N:2]>>[C:1]-Br.[N:2]\t5\n";
  const auto report = load_templates(in);
  EXPECT_EQ(report.parsed, 3u);
  EXPECT_EQ(report.duplicates, 1u);
  EXPECT_EQ(report.rejected, 3u);
  EXPECT_EQ(report.errors.size(), 3u);
  ASSERT_EQ(report.table.size(), 2u);
  EXPECT_EQ(report.table[1].class_tag, 5);
  EXPECT_TRUE(report.table.contains(ester.template_key));
}

}  // namespace
}  // namespace retrologic
