from utils.common import load_plugin_class


class SuiteFactory:
    """Creates ablation suites by registry name (ablations/<name>/suite.py)."""

    def __init__(self, debug=False):
        self.debug = debug
        self.suites_dir = "ablations"

    def create_suite(self, suite_name: str):
        suite_class = load_plugin_class(
            self.suites_dir, suite_name, "suite", "Suite", debug=self.debug
        )
        return suite_class(debug=self.debug)
