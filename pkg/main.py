# Entry point: `python main.py run --config relaxlab/data/configs/layer-demo.json`
# (same commands as the installed `relaxlab` script).

from relaxlab.cli import cli

if __name__ == "__main__":
    cli()
