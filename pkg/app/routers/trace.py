from typing import List

from fastapi import APIRouter, Depends, HTTPException
from sqlalchemy.orm import Session

from app.crypto import clpa
from app.crypto.clpa import Pseudonym
from app.database.database import get_db
from app.database.tra_store import load_tra_state
from app.exceptions import DecodeError
from app.models.issued_pseudonym import IssuedPseudonym
from app.schemas import schemas

router = APIRouter(
    prefix="/trace",
    tags=["trace"],
    responses={404: {"description": "Not found"}},
)


@router.post("/", response_model=schemas.TraceResponse)
def trace_pseudonym(request: schemas.TraceRequest, db: Session = Depends(get_db)):
    tra = load_tra_state(db)
    if tra is None:
        raise HTTPException(status_code=503, detail="TRA state not loaded")
    try:
        aid = Pseudonym.from_hex(tra.curve, request.aid)
    except (DecodeError, ValueError) as e:
        raise HTTPException(status_code=400, detail=f"Malformed AID: {e}")
    result = clpa.trace(tra, aid)
    return schemas.TraceResponse(aid=request.aid, traced=result.traced, rid=result.rid.name if result.traced else None)


@router.get("/pseudonyms", response_model=List[schemas.IssuedPseudonym])
def read_pseudonyms(skip: int = 0, limit: int = 100, db: Session = Depends(get_db)):
    return db.query(IssuedPseudonym).offset(skip).limit(limit).all()
