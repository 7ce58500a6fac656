from utils.common import load_plugin_class


class MetricFactory:
    """Creates metrics by registry name (metrics/<name>/metric.py)."""

    def __init__(self, debug=False):
        self.debug = debug
        self.metrics_dir = "metrics"

    def create_metric(self, metric_name: str):
        metric_class = load_plugin_class(
            self.metrics_dir, metric_name, "metric", "Metric", debug=self.debug
        )
        return metric_class(debug=self.debug)

    def calculate_all(self, metric_names, outputs):
        """{metric_name: value} for every named metric."""
        return {name: self.create_metric(name).calculate(outputs) for name in metric_names}
