import pytest

from acev2 import analysis, zoo


@pytest.fixture(scope="session")
def mbv2_relu():
    return zoo.build_mobilenet_v2(4, 4, "relu", "channelwise")


@pytest.fixture(scope="session")
def mbv2_relu_report(mbv2_relu):
    return analysis.analyze(mbv2_relu)


@pytest.fixture(scope="session")
def resnet_binary():
    return zoo.build_resnet50_branches(2)


@pytest.fixture(scope="session")
def resnet_binary_report(resnet_binary):
    return analysis.analyze(resnet_binary)


@pytest.fixture(scope="session")
def pike_reports():
    return {scale: analysis.analyze(zoo.build_pikelpn(scale))
            for scale in ("1x", "2x", "3x", "6x")}
