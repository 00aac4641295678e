from flask import Flask
from .config import Config

__version__ = "1.0.0"


def create_app(test_config=None):
    app = Flask(__name__)
    app.config.from_object(Config)
    if test_config:
        app.config.update(test_config)

    # app.logger is the "ridepool" logger: library modules log through its children
    app.logger.setLevel(app.config["LOG_LEVEL"])

    # ── Register CLI blueprints ───────────────────────────
    from .commands.network import network_bp
    from .commands.demand import demand_bp
    from .commands.simulation import simulation_bp
    from .commands.validation import validation_bp

    app.register_blueprint(network_bp)
    app.register_blueprint(demand_bp)
    app.register_blueprint(simulation_bp)
    app.register_blueprint(validation_bp)

    return app
