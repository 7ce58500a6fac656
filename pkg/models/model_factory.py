from utils.common import load_plugin_class, print_colored


class ModelFactory:
    """Creates models by registry name (models/<name>/model.py) and restores checkpoints."""

    def __init__(self, debug=False):
        self.debug = debug
        self.models_dir = "models"

    def create_model(self, model_name: str, config=None):
        if self.debug:
            print_colored(f"Initializing model: {model_name}", "gray")
        model_class = load_plugin_class(
            self.models_dir, model_name, "model", "Model", debug=self.debug
        )
        return model_class(config=config, debug=self.debug)

    def load_checkpoint(self, path, overrides=None):
        """Rebuild the model described by a checkpoint's run.cfg and restore it."""
        # pylint: disable=import-outside-toplevel
        from models.base_model import read_checkpoint_config

        config = read_checkpoint_config(path, overrides)
        model = self.create_model(config.model, config)
        model.load(path)
        return model
