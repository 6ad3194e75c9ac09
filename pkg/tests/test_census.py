"""Operation tallies over the zoo graphs and hand-built fragments."""

import pytest

from acev2 import zoo
from acev2.census import (
    CAT_ACTIVATION,
    CAT_BATCHNORM,
    CAT_CONV,
    CAT_QUANT_SCALE,
    CAT_SKIP,
    census_graph,
    census_layer,
)
from acev2.cost import ADD, MAC, MULTIPLY, SHIFT
from acev2.errors import MissingShapeError
from acev2.formats import FP32, NumericFormat
from acev2.ir import (
    Graph,
    LayerNode,
    POT_SCALE,
    QuantizationAnnotation,
    TensorShape,
    infer_shapes,
)

INT4 = NumericFormat.fixed(4)
INT8 = NumericFormat.fixed(8)


def one_conv_graph(quant=None, weight=INT4, act=INT4):
    return Graph("t", TensorShape(1, 8, 8, 16), [
        LayerNode("in", "Input"),
        LayerNode("pw", "PointwiseConv2D", {"out_channels": 32}, ["in"],
                  weight_format=weight, act_format=act, quant=quant),
        LayerNode("out", "Output", {}, ["pw"]),
    ])


class TestComputeLayers:
    def test_conv_macs(self):
        g = Graph("t", TensorShape(1, 224, 224, 3), [
            LayerNode("in", "Input"),
            LayerNode("conv", "Conv2D",
                      {"kernel": [3, 3], "stride": 2, "out_channels": 32,
                       "padding": "same"}, ["in"],
                      weight_format=INT8, act_format=INT8),
            LayerNode("out", "Output", {}, ["conv"]),
        ])
        entries = census_graph(g).entries
        assert len(entries) == 1
        e = entries[0]
        assert e.op_class == MAC
        assert e.count == 112 * 112 * 32 * 9 * 3
        assert (e.format_a, e.format_b) == (INT8, INT8)

    def test_depthwise_divides_by_groups(self):
        g = Graph("t", TensorShape(1, 8, 8, 16), [
            LayerNode("in", "Input"),
            LayerNode("dw", "DepthwiseConv2D",
                      {"kernel": [3, 3], "stride": 1, "padding": "same"},
                      ["in"], weight_format=INT8, act_format=INT8),
            LayerNode("out", "Output", {}, ["dw"]),
        ])
        (entry,) = census_graph(g).entries
        assert entry.count == 8 * 8 * 16 * 9

    def test_unannotated_layer_defaults_to_fp32(self):
        g = one_conv_graph(weight=None, act=None)
        (entry,) = census_graph(g).entries
        assert entry.format_a == FP32
        assert entry.format_b == FP32

    def test_pot_weights_turn_macs_into_shift_plus_add(self):
        g = one_conv_graph(QuantizationAnnotation(weight_quantizer="pot",
                                                  scale_format=POT_SCALE))
        tally = census_graph(g)
        macs = 8 * 8 * 32 * 16
        by_class = {e.op_class: e for e in tally.entries}
        assert set(by_class) == {SHIFT, ADD}
        assert by_class[SHIFT].count == macs
        assert by_class[SHIFT].shift_range == 8  # 4-bit grid: sign + 3 bits
        assert by_class[SHIFT].category == CAT_CONV
        assert by_class[ADD].count == macs
        # no scale ops: power-of-two levels carry no learned scale factor
        assert tally.count(category=CAT_QUANT_SCALE) == 0


class TestQuantScale:
    def test_channelwise_one_multiply_per_output_element(self):
        g = one_conv_graph(QuantizationAnnotation())
        tally = census_graph(g)
        assert tally.count(MULTIPLY, CAT_QUANT_SCALE) == 8 * 8 * 32
        (scale,) = [e for e in tally.entries if e.category == CAT_QUANT_SCALE]
        assert scale.format_a == FP32

    def test_subchannelwise_doubles_the_multiplies(self):
        g = one_conv_graph(QuantizationAnnotation(
            granularity="subchannelwise", vectors_per_channel=2))
        assert census_graph(g).count(MULTIPLY, CAT_QUANT_SCALE) == 2 * 8 * 8 * 32

    def test_pot_scale_swaps_class_but_keeps_count(self):
        g_float = one_conv_graph(QuantizationAnnotation(scale_format=FP32))
        g_pot = one_conv_graph(QuantizationAnnotation(scale_format=POT_SCALE))
        mults = census_graph(g_float).count(MULTIPLY, CAT_QUANT_SCALE)
        shifts = census_graph(g_pot).count(SHIFT, CAT_QUANT_SCALE)
        assert mults == shifts == 8 * 8 * 32

    def test_fixed_point_scale_multiplies_at_that_format(self):
        g = one_conv_graph(QuantizationAnnotation(scale_format=INT8))
        (scale,) = [e for e in census_graph(g).entries
                    if e.category == CAT_QUANT_SCALE]
        assert scale.op_class == MULTIPLY
        assert scale.format_a == INT8


class TestElementwiseLayers:
    def build_act(self, kind):
        return Graph("t", TensorShape(1, 8, 8, 4), [
            LayerNode("in", "Input"),
            LayerNode("act", "Activation", {"activation": kind}, ["in"]),
            LayerNode("out", "Output", {}, ["act"]),
        ])

    def test_relu_is_free(self):
        assert census_graph(self.build_act("relu")).entries == []

    def test_prelu_multiplies(self):
        tally = census_graph(self.build_act("prelu"))
        assert tally.count(MULTIPLY, CAT_ACTIVATION) == 256
        assert tally.count(ADD, CAT_ACTIVATION) == 0

    def test_dprelu_adds_exactly_one_add_per_element_over_prelu(self):
        prelu = census_graph(self.build_act("prelu"))
        dprelu = census_graph(self.build_act("dprelu"))
        assert (dprelu.count(MULTIPLY, CAT_ACTIVATION)
                == prelu.count(MULTIPLY, CAT_ACTIVATION))
        assert dprelu.count(ADD, CAT_ACTIVATION) == 256

    def test_batchnorm_mult_and_add_at_param_format(self):
        g = Graph("t", TensorShape(1, 8, 8, 4), [
            LayerNode("in", "Input"),
            LayerNode("bn", "BatchNorm", {}, ["in"]),
            LayerNode("qn", "BatchNorm", {"quantnorm": True}, ["bn"],
                      weight_format=INT8),
            LayerNode("out", "Output", {}, ["qn"]),
        ])
        entries = census_graph(g).entries
        fp = [e for e in entries if e.layer_id == "bn"]
        lowered = [e for e in entries if e.layer_id == "qn"]
        assert {e.op_class for e in fp} == {MULTIPLY, ADD}
        assert all(e.format_a == FP32 for e in fp)
        assert all(e.format_a == INT8 for e in lowered)

    def test_skip_add_counts_once_regardless_of_fanin(self):
        def merge(n_inputs):
            refs = ["in"] * n_inputs
            g = Graph("t", TensorShape(1, 8, 8, 4), [
                LayerNode("in", "Input"),
                LayerNode("add", "Add", {}, refs),
                LayerNode("out", "Output", {}, ["add"]),
            ])
            return census_graph(g).count(ADD, CAT_SKIP)
        assert merge(2) == merge(3) == merge(4) == 256

    def test_concat_and_pool_cost_nothing(self):
        g = Graph("t", TensorShape(1, 8, 8, 4), [
            LayerNode("in", "Input"),
            LayerNode("cat", "Concat", {}, ["in", "in"]),
            LayerNode("pool", "Pool", {"pool": "global_avg"}, ["cat"]),
            LayerNode("out", "Output", {}, ["pool"]),
        ])
        assert census_graph(g).entries == []


class TestModelLevelCounts:
    def test_mbv2_batchnorm_tallies(self, mbv2_relu):
        tally = census_graph(mbv2_relu)
        mults = tally.count(MULTIPLY, CAT_BATCHNORM)
        adds = tally.count(ADD, CAT_BATCHNORM)
        assert mults == adds
        assert mults == pytest.approx(6.67e6, rel=0.05)

    def test_mbv2_prelu_multiplies(self):
        g = zoo.build_mobilenet_v2(4, 4, "prelu", "channelwise")
        tally = census_graph(g)
        assert tally.count(MULTIPLY, CAT_ACTIVATION) == pytest.approx(6.1e6, rel=0.05)
        assert tally.count(ADD, CAT_ACTIVATION) == 0

    def test_activation_swap_changes_nothing_else(self, mbv2_relu):
        relu = census_graph(mbv2_relu)
        dprelu = census_graph(zoo.build_mobilenet_v2(4, 4, "dprelu",
                                                     "channelwise"))
        strip = lambda tally: [e for e in tally.entries
                               if e.category != CAT_ACTIVATION]
        assert strip(dprelu) == strip(relu)
        elems = dprelu.count(MULTIPLY, CAT_ACTIVATION)
        assert dprelu.count(ADD, CAT_ACTIVATION) == elems > 0

    def test_mbv2_scale_counts_by_granularity(self, mbv2_relu):
        channelwise = census_graph(mbv2_relu)
        sub = census_graph(zoo.build_mobilenet_v2(4, 4, "relu", "subchannelwise"))
        n1 = channelwise.count(MULTIPLY, CAT_QUANT_SCALE)
        n2 = sub.count(MULTIPLY, CAT_QUANT_SCALE)
        assert n1 == pytest.approx(6.67e6, rel=0.05)
        assert n2 == 2 * n1

    def test_tally_is_additive_over_layers(self, mbv2_relu):
        shapes = infer_shapes(mbv2_relu)
        total = census_graph(mbv2_relu)
        per_layer = []
        for node in mbv2_relu.nodes:
            in_shape = shapes[node.inputs[0]] if node.inputs else None
            per_layer.extend(census_layer(node, in_shape, shapes[node.id]))
        assert sum(e.count for e in per_layer) == sum(
            e.count for e in total.entries)

    def test_trivial_graph_has_empty_tally(self):
        g = Graph("t", TensorShape(1, 8, 8, 3), [
            LayerNode("in", "Input"),
            LayerNode("out", "Output", {}, ["in"]),
        ])
        assert census_graph(g).entries == []

    def test_missing_shape_is_reported(self):
        node = LayerNode("pw", "PointwiseConv2D", {"out_channels": 4}, ["in"],
                         weight_format=INT4, act_format=INT4)
        with pytest.raises(MissingShapeError):
            census_layer(node, None, None)
