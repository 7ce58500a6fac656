import io

import pytest

from metrics.fg_accuracy.metric import FgAccuracyMetric
from utils.common import load_plugin_class, print_colored, snake_to_camel
from utils.errors import ConfigError


def test_snake_to_camel():
    assert snake_to_camel("unimodal_mavt") == "UnimodalMavt"
    assert snake_to_camel("fg_accuracy") == "FgAccuracy"


def test_print_colored_is_plain_off_terminal():
    stream = io.StringIO()
    print_colored("hello", "success", file=stream)
    assert stream.getvalue() == "hello\n"


def test_load_plugin_class_resolves_by_name():
    assert load_plugin_class("metrics", "fg_accuracy", "metric", "Metric") is FgAccuracyMetric


def test_load_plugin_class_missing_module():
    with pytest.raises(ConfigError, match="not found"):
        load_plugin_class("metrics", "sharpe_ratio", "metric", "Metric")


def test_load_plugin_class_missing_class():
    with pytest.raises(ConfigError, match="class 'FgAccuracySuite' not found"):
        load_plugin_class("metrics", "fg_accuracy", "metric", "Suite")
