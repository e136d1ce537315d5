from pydantic_settings import BaseSettings, SettingsConfigDict
from functools import lru_cache
from dotenv import load_dotenv

load_dotenv()

class Settings(BaseSettings):
    LOG_LEVEL: str = "INFO"
    THREADS: int = 2  # caps worker threads (concurrent sweeps)
    OUTPUT_DIR: str = "./runs"

    # Inference batches lanes in chunks of this many windows
    PREDICT_CHUNK: int = 4096

    model_config = SettingsConfigDict(env_file=".env", env_prefix="USSEG_", extra="ignore")

@lru_cache()
def get_settings():
    return Settings()

settings = get_settings()
