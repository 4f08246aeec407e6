# hierstein/api.py
import logging
import sys
from pathlib import Path

from dotenv import load_dotenv
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

# ---- Load environment early (package .env then working-directory .env)
ENV_HERE = Path(__file__).resolve().parent / ".env"
load_dotenv(ENV_HERE)
load_dotenv(override=False)

from hierstein import __version__  # noqa: E402
from hierstein.routes.experiments import router as experiments_router  # noqa: E402


def create_app() -> FastAPI:
    app = FastAPI(title="hierstein", version=__version__)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_credentials=False,
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.include_router(experiments_router)

    @app.get("/ping")
    def ping():
        return {"message": "pong"}

    logging.getLogger("uvicorn.error").info(f"[hierstein] Python: {sys.executable}")
    return app


app = create_app()
