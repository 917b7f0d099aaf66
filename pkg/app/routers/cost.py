from fastapi import APIRouter

from app.bench.cost_model import cost_model
from app.schemas import schemas

router = APIRouter(
    prefix="/cost",
    tags=["cost"],
)


@router.post("/", response_model=schemas.CostReport)
def compute_cost(data: schemas.CostModelInput):
    return cost_model(data)
