import os
from dotenv import load_dotenv

load_dotenv()

class Config:
    OUTPUT_DIR = os.getenv("RIDEPOOL_OUTPUT_DIR", "output")
    LOG_LEVEL = os.getenv("RIDEPOOL_LOG_LEVEL", "INFO")

    # Sweep parallelism (-1 = all available cores)
    JOBS = int(os.getenv("RIDEPOOL_JOBS", -1))

    # Routing
    APSP_MAX_NODES = int(os.getenv("RIDEPOOL_APSP_MAX_NODES", 2500))

    # Reports
    HISTOGRAM_BIN = float(os.getenv("RIDEPOOL_HISTOGRAM_BIN", 60))
