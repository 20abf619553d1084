from flask import Flask
from flask.cli import FlaskGroup
import click
import os
import sys
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Import database and models
from egpmda.database import db


def create_app(test_config=None):
    app = Flask('egpmda')

    # Configuration
    app.config['SQLALCHEMY_DATABASE_URI'] = os.getenv('DATABASE_URL', 'sqlite:///egpmda_runs.db')
    app.config['SQLALCHEMY_TRACK_MODIFICATIONS'] = False

    # Run defaults, each overridable per command
    app.config['EGP_DATA_DIR'] = os.getenv('EGP_DATA_DIR', 'data')
    app.config['EGP_OUT_DIR'] = os.getenv('EGP_OUT_DIR', 'runs')
    app.config['EGP_SEED'] = int(os.getenv('EGP_SEED', 0))
    app.config['EGP_THREADS'] = int(os.getenv('EGP_THREADS', 1))
    app.config['EGP_LOG_LEVEL'] = os.getenv('EGP_LOG_LEVEL', 'INFO').upper()

    if test_config:
        app.config.update(test_config)

    app.logger.setLevel(app.config['EGP_LOG_LEVEL'])

    # Initialize extensions with app
    db.init_app(app)

    # Register blueprints
    from egpmda.graph.routes import graph_bp
    from egpmda.split.routes import split_bp
    from egpmda.trainer.routes import trainer_bp
    from egpmda.evaluator.routes import evaluator_bp
    from egpmda.explain.routes import explain_bp

    app.register_blueprint(graph_bp)
    app.register_blueprint(split_bp)
    app.register_blueprint(trainer_bp)
    app.register_blueprint(evaluator_bp)
    app.register_blueprint(explain_bp)

    # Create database tables
    with app.app_context():
        db.create_all()

    return app


cli = FlaskGroup(
    name='egpmda',
    help='Heterogeneous-graph miRNA-disease association prediction',
    create_app=create_app,
    add_default_commands=False,
    add_version_option=False
)


def dispatch(argv=None):
    """Run one command and return its exit status: 0 ok, 1 failure, 2 usage error"""
    try:
        rv = cli.main(args=argv, prog_name='egpmda', standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.exceptions.Abort:
        click.echo('Aborted!', err=True)
        return 1
    return rv if isinstance(rv, int) else 0


if __name__ == '__main__':
    sys.exit(dispatch(sys.argv[1:]))
