#include "lcps/core/adam.hpp"
#include "lcps/engine/train.hpp"
#include "lcps/masks/masks.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace lcps;

namespace {

KernelSet set_of(std::size_t size, std::initializer_list<std::size_t> bits)
{
    KernelSet s(size);
    for (std::size_t b : bits)
        s.set(b);
    return s;
}

const KernelSpace four{{{2, 2}}};

} // namespace

TEST(KernelSpace, RowMajorAddressing)
{
    const KernelSpace space({{2, 3}, {4, 2}});
    EXPECT_EQ(space.total(), 14u);
    EXPECT_EQ(space.index({0, 1, 2}), 5u);
    EXPECT_EQ(space.index({1, 0, 1}), 7u);
    for (std::size_t i = 0; i < space.total(); ++i)
        EXPECT_EQ(space.index(space.address(i)), i);
    EXPECT_THROW(space.index({0, 2, 0}), StructuralError);
    EXPECT_THROW(space.address(14), StructuralError);
    EXPECT_NE(space.fingerprint(), KernelSpace({{3, 2}, {4, 2}}).fingerprint());
}

TEST(KernelSet, SetAlgebra)
{
    const auto a = set_of(70, {0, 1, 65});
    const auto b = set_of(70, {1, 2});
    EXPECT_EQ((a | b).indices(), (std::vector<std::size_t>{0, 1, 2, 65}));
    EXPECT_EQ((a & b).indices(), (std::vector<std::size_t>{1}));
    EXPECT_EQ((~a).count(), 67u);
    EXPECT_TRUE(set_of(70, {1}).subset_of(a));
    EXPECT_FALSE(b.subset_of(a));
    EXPECT_THROW(a | KernelSet(71), StructuralError);
    EXPECT_EQ(KernelSet::from_words(70, a.words()), a);
    EXPECT_THROW(KernelSet::from_words(3, {0xFF}), StructuralError);
}

TEST(KernelSet, GateDerivesBias)
{
    const KernelSpace space({{2, 2}});
    const KernelGate g = set_of(4, {1}).gate(space, 0);
    EXPECT_FALSE(g.kernel(0, 0));
    EXPECT_TRUE(g.kernel(0, 1));
    EXPECT_TRUE(g.bias[0]);
    EXPECT_FALSE(g.bias[1]);
}

TEST(Registry, EmptyRegistryLeavesEverythingTrainable)
{
    const MaskRegistry r(four);
    EXPECT_EQ(trainable_kernels(r, four).count(), 4u);
}

TEST(Registry, SingleMaskComplement)
{
    const auto r = freeze_task(MaskRegistry(four), 0, TaskMask{0, set_of(4, {0, 1})});
    EXPECT_EQ(trainable_kernels(r, four).indices(), (std::vector<std::size_t>{2, 3}));
}

TEST(Registry, OverlappingMasks)
{
    auto r = freeze_task(MaskRegistry(four), 0, TaskMask{0, set_of(4, {0, 1})});
    r = freeze_task(r, 1, TaskMask{1, set_of(4, {1, 2})});
    EXPECT_EQ(trainable_kernels(r, four).indices(), (std::vector<std::size_t>{3}));
    EXPECT_EQ(r.frozen().indices(), (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_EQ(active_mask(r, 0).kernels.indices(), (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(active_mask(r, 1).kernels.indices(), (std::vector<std::size_t>{1, 2}));
}

TEST(Registry, Errors)
{
    auto r = freeze_task(MaskRegistry(four), 0, TaskMask{0, set_of(4, {0})});
    EXPECT_THROW(freeze_task(r, 0, TaskMask{0, set_of(4, {1})}), RegistryError);
    EXPECT_THROW(freeze_task(r, 1, TaskMask{1, KernelSet(4)}), RegistryError);
    EXPECT_THROW(freeze_task(r, 1, TaskMask{1, KernelSet(5, true)}), StructuralError);
    EXPECT_THROW(active_mask(r, 7), LookupError);
    EXPECT_THROW(r.require_compatible(KernelSpace({{4, 1}})), StructuralError);
}

TEST(Registry, BiasOwnershipFollowsTouchedFilters)
{
    const KernelSpace space({{3, 2}});
    const auto r = freeze_task(MaskRegistry(space), 0, TaskMask{0, set_of(6, {1})});
    const auto owned = frozen_filters(r, space);
    EXPECT_TRUE(owned[0][0]);
    EXPECT_FALSE(owned[0][1]);
    EXPECT_FALSE(owned[0][2]);
}

TEST(Registry, RandomSequencesKeepUnionAndImmutability)
{
    Rng rng = make_rng(1, "test");
    const KernelSpace space({{5, 7}, {3, 5}, {2, 3}});
    for (int trial = 0; trial < 50; ++trial) {
        MaskRegistry r(space);
        std::vector<TaskMask> stored;
        KernelSet frozen_before(space.total());
        for (int t = 0; t < 6; ++t) {
            TaskMask m{t, KernelSet(space.total())};
            for (std::size_t i = 0; i < space.total(); ++i)
                if (uniform(rng, 0, 1) < 0.3)
                    m.kernels.set(i);
            if (m.kernels.count() == 0)
                m.kernels.set(0);
            r = freeze_task(r, t, m);
            stored.push_back(m);
            KernelSet u(space.total());
            for (const auto& s : stored)
                u = u | s.kernels;
            ASSERT_EQ(r.frozen(), u);
            ASSERT_TRUE(frozen_before.subset_of(r.frozen()));
            frozen_before = r.frozen();
            for (const auto& s : stored)
                ASSERT_EQ(active_mask(r, s.task_id), s);
        }
    }
}

TEST(Registry, TrainingUnderRegistryLeavesFrozenKernelsAlone)
{
    auto model = build_unet<float>(UNetConfig{{2, 4}, 4, 1, 1, 3, 8}, 3);
    const KernelSpace& space = model.kernel_space();
    auto r = freeze_task(MaskRegistry(space), 0, TaskMask{0, set_of(space.total(), {0, 1})});
    r = freeze_task(r, 1, TaskMask{1, set_of(space.total(), {1, 2})});
    const auto plan = subnetwork_plan(model, r, KernelSet(space.total(), true), 0);
    const auto before = model.params();

    Rng rng = make_rng(2, "test");
    AdamState<float> st(model.params(), AdamConfig{});
    for (int k = 0; k < 10; ++k) {
        for (auto& p : model.params())
            p.grad = oracle::random_tensor<float>(p.value.shape(), rng);
        adam_step(model.params(), st, plan.trainable);
    }
    // enc0.a has one input channel, so kernels 0 and 1 are its two filters; kernel 2 is
    // enc0.b (0, 0). Every filter touched by a mask also has its bias frozen.
    const auto& l0 = model.prunable()[0];
    const auto& l1 = model.prunable()[1];
    EXPECT_TRUE(bit_equal(model.params()[l0.weight].value, before[l0.weight].value));
    EXPECT_TRUE(bit_equal(model.params()[l0.bias].value, before[l0.bias].value));
    const auto& w1 = model.params()[l1.weight].value;
    for (Index q = 0; q < 9; ++q)
        EXPECT_EQ(w1[q], before[l1.weight].value[q]);
    EXPECT_EQ(model.params()[l1.bias].value[0], before[l1.bias].value[0]);
    EXPECT_NE(w1[9], before[l1.weight].value[9]);
    EXPECT_NE(model.params()[l1.bias].value[1], before[l1.bias].value[1]);
}
